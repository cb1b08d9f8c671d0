/**
 * Convolutional VAE with a mirrored encoder/decoder.
 *
 * Three encoder blocks (channel widths 32/64/128), each `blocks[i]` conv
 * layers deep with a strided conv closing the block, so the input is
 * downsampled 8x overall. The decoder mirrors the structure with
 * transposed convs. The encoder head emits the posterior mean and
 * log-variance; the posterior mean is the embedding we later export.
 * Every initializer is explicitly seeded from the config seed.
 */

import * as tf from "@tensorflow/tfjs";
import { VaeConfig } from "./config.js";

export interface VaeModel {
  encoder: tf.LayersModel; // image -> [mu, logVar]
  decoder: tf.LayersModel; // z -> image
  latentSize: number;
  imageSize: number;
}

const DEFAULT_CHANNELS: [number, number, number] = [32, 64, 128];

export function buildVae(cfg: VaeConfig, imageSize: number): VaeModel {
  if (imageSize % 8 !== 0) {
    throw new Error(`image size ${imageSize} must be divisible by 8 (three stride-2 stages)`);
  }
  const channels = cfg.channels ?? DEFAULT_CHANNELS;
  let seed = cfg.seed * 9973 + 1;
  const init = () => tf.initializers.heNormal({ seed: seed++ });

  const image = tf.input({ shape: [imageSize, imageSize, 1] });
  let h: tf.SymbolicTensor = image;
  cfg.blocks.forEach((depth, i) => {
    for (let j = 0; j < depth - 1; j++) {
      h = tf.layers.conv2d({
        filters: channels[i], kernelSize: 3, padding: "same", activation: "relu",
        kernelInitializer: init(),
      }).apply(h) as tf.SymbolicTensor;
    }
    h = tf.layers.conv2d({
      filters: channels[i], kernelSize: 3, strides: 2, padding: "same", activation: "relu",
      kernelInitializer: init(),
    }).apply(h) as tf.SymbolicTensor;
  });
  const flat = tf.layers.flatten().apply(h) as tf.SymbolicTensor;
  const mu = tf.layers.dense({ units: cfg.latentSize, kernelInitializer: init(), name: "mu" })
    .apply(flat) as tf.SymbolicTensor;
  const logVar = tf.layers.dense({ units: cfg.latentSize, kernelInitializer: init(), name: "log_var" })
    .apply(flat) as tf.SymbolicTensor;
  const encoder = tf.model({ inputs: image, outputs: [mu, logVar], name: "encoder" });

  const bottom = imageSize / 8;
  const z = tf.input({ shape: [cfg.latentSize] });
  let d = tf.layers.dense({
    units: bottom * bottom * channels[2], activation: "relu", kernelInitializer: init(),
  }).apply(z) as tf.SymbolicTensor;
  d = tf.layers.reshape({ targetShape: [bottom, bottom, channels[2]] })
    .apply(d) as tf.SymbolicTensor;
  [...cfg.blocks].reverse().forEach((depth, idx) => {
    const width = channels[2 - idx];
    d = tf.layers.conv2dTranspose({
      filters: width, kernelSize: 3, strides: 2, padding: "same", activation: "relu",
      kernelInitializer: init(),
    }).apply(d) as tf.SymbolicTensor;
    for (let j = 0; j < depth - 1; j++) {
      d = tf.layers.conv2d({
        filters: width, kernelSize: 3, padding: "same", activation: "relu",
        kernelInitializer: init(),
      }).apply(d) as tf.SymbolicTensor;
    }
  });
  const out = tf.layers.conv2d({
    filters: 1, kernelSize: 3, padding: "same", activation: "sigmoid",
    kernelInitializer: init(),
  }).apply(d) as tf.SymbolicTensor;
  const decoder = tf.model({ inputs: z, outputs: out, name: "decoder" });

  return { encoder, decoder, latentSize: cfg.latentSize, imageSize };
}

/** z = mu + exp(logVar/2) * eps, with eps ~ N(0, 1) from a seeded draw. */
export function reparameterize(mu: tf.Tensor2D, logVar: tf.Tensor2D, seed: number): tf.Tensor2D {
  return tf.tidy(() => {
    const eps = tf.randomNormal(mu.shape, 0, 1, "float32", seed);
    return mu.add(logVar.mul(0.5).exp().mul(eps)) as tf.Tensor2D;
  });
}

export interface VaeLoss {
  total: tf.Scalar;
  reconstruction: number;
  kl: number;
}

/** Per-image binary cross-entropy summed over pixels plus weighted KL. */
export function vaeLoss(model: VaeModel, batch: tf.Tensor4D, klWeight: number,
                        sampleSeed: number): VaeLoss {
  const [mu, logVar] = model.encoder.apply(batch) as [tf.Tensor2D, tf.Tensor2D];
  const zSample = reparameterize(mu, logVar, sampleSeed);
  const recon = model.decoder.apply(zSample) as tf.Tensor4D;
  const eps = 1e-7;
  const clipped = recon.clipByValue(eps, 1 - eps);
  const bce = batch.mul(clipped.log())
    .add(tf.scalar(1).sub(batch).mul(tf.scalar(1).sub(clipped).log()))
    .neg()
    .sum([1, 2, 3])
    .mean() as tf.Scalar;
  const kl = tf.scalar(-0.5).mul(
    tf.scalar(1).add(logVar).sub(mu.square()).sub(logVar.exp()).sum(1),
  ).mean() as tf.Scalar;
  const total = bce.add(kl.mul(klWeight)) as tf.Scalar;
  return { total, reconstruction: bce.dataSync()[0], kl: kl.dataSync()[0] };
}
