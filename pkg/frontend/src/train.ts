/**
 * VAE training loop and encoder checkpointing.
 *
 * Full-dataset epochs over seeded-shuffled minibatches; per-epoch
 * reconstruction and KL losses are logged and returned. A non-finite
 * loss aborts immediately with the offending step. The checkpoint file
 * carries the encoder topology, its weights (base64), the config echo,
 * and the loss history sidecar-style.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { VaeConfig, validateConfig } from "./config.js";
import { ImageDataset } from "./data.js";
import { buildVae, vaeLoss, VaeModel } from "./model.js";

export interface EpochLog {
  epoch: number;
  loss: number;
  reconstruction: number;
  kl: number;
}

export interface TrainResult {
  model: VaeModel;
  history: EpochLog[];
}

/** Deterministic shuffle (mulberry32) so runs reproduce given the seed. */
function shuffledIndices(n: number, seed: number): Uint32Array {
  let a = (seed >>> 0) || 1;
  const rand = () => {
    a |= 0; a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const idx = new Uint32Array(n);
  for (let i = 0; i < n; i++) idx[i] = i;
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    const tmp = idx[i]; idx[i] = idx[j]; idx[j] = tmp;
  }
  return idx;
}

function batchTensor(ds: ImageDataset, indices: Uint32Array, start: number,
                     count: number): tf.Tensor4D {
  const frame = ds.size * ds.size;
  const out = new Float32Array(count * frame);
  for (let b = 0; b < count; b++) {
    const src = indices[start + b] * frame;
    out.set(ds.images.subarray(src, src + frame), b * frame);
  }
  return tf.tensor4d(out, [count, ds.size, ds.size, 1]);
}

export function trainVae(cfg: VaeConfig, ds: ImageDataset,
                         onEpoch?: (log: EpochLog) => void): TrainResult {
  validateConfig(cfg);
  const model = buildVae(cfg, ds.size);
  const optimizer = tf.train.adam(cfg.learningRate);
  const vars = [...model.encoder.trainableWeights, ...model.decoder.trainableWeights]
    .map((w) => w.read() as tf.Variable);
  const history: EpochLog[] = [];
  let sampleSeed = cfg.seed * 7919 + 13;
  let step = 0;
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const order = shuffledIndices(ds.n, cfg.seed + epoch * 101);
    let sumLoss = 0, sumRecon = 0, sumKl = 0, batches = 0;
    for (let start = 0; start < ds.n; start += cfg.batchSize) {
      const count = Math.min(cfg.batchSize, ds.n - start);
      const batch = batchTensor(ds, order, start, count);
      let recon = 0, kl = 0;
      const cost = optimizer.minimize(() => {
        const parts = vaeLoss(model, batch, cfg.klWeight, sampleSeed++);
        recon = parts.reconstruction;
        kl = parts.kl;
        return parts.total;
      }, true, vars);
      const lossVal = cost!.dataSync()[0];
      cost!.dispose();
      batch.dispose();
      if (!Number.isFinite(lossVal)) {
        throw new Error(`non-finite loss at epoch ${epoch}, step ${step}`);
      }
      sumLoss += lossVal; sumRecon += recon; sumKl += kl; batches++;
      step++;
    }
    const log: EpochLog = {
      epoch, loss: sumLoss / batches,
      reconstruction: sumRecon / batches, kl: sumKl / batches,
    };
    history.push(log);
    if (onEpoch) onEpoch(log);
  }
  return { model, history };
}

// --------------------------------------------------------------------------
// encoder checkpoint (topology + weights + config echo in one JSON file)

export interface Checkpoint {
  config: VaeConfig;
  imageSize: number;
  history: EpochLog[];
  modelTopology: unknown;
  weightSpecs: unknown;
  weightDataBase64: string;
}

export async function saveEncoder(result: TrainResult, cfg: VaeConfig,
                                  file: string): Promise<void> {
  let artifacts: tf.io.ModelArtifacts | null = null;
  await result.model.encoder.save(tf.io.withSaveHandler(async (a) => {
    artifacts = a;
    return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
  }));
  const a = artifacts! as tf.io.ModelArtifacts;
  const doc: Checkpoint = {
    config: cfg,
    imageSize: result.model.imageSize,
    history: result.history,
    modelTopology: a.modelTopology,
    weightSpecs: a.weightSpecs,
    weightDataBase64: Buffer.from(a.weightData as ArrayBuffer).toString("base64"),
  };
  fs.mkdirSync(path.dirname(path.resolve(file)), { recursive: true });
  fs.writeFileSync(file, JSON.stringify(doc));
}

export async function loadEncoder(file: string): Promise<{ encoder: tf.LayersModel; meta: Checkpoint }> {
  const doc = JSON.parse(fs.readFileSync(file, "utf-8")) as Checkpoint;
  const weightData = new Uint8Array(Buffer.from(doc.weightDataBase64, "base64")).buffer;
  const encoder = await tf.loadLayersModel(tf.io.fromMemory({
    modelTopology: doc.modelTopology as {},
    weightSpecs: doc.weightSpecs as tf.io.WeightsManifestEntry[],
    weightData,
  }));
  return { encoder, meta: doc };
}
