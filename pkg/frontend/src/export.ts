/**
 * Posterior-mean embedding export.
 *
 * Runs the trained encoder over every image (train and test together,
 * split tags preserved) and writes the mu rows as a MEMB file, plus a
 * sidecar JSON echoing the config and loss history.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { ImageDataset } from "./data.js";
import { encodeMemb } from "./memb.js";
import { Checkpoint, loadEncoder } from "./train.js";

export interface ExportInfo {
  file: string;
  n: number;
  dim: number;
  nClasses: number;
}

export async function exportEmbeddings(checkpointFile: string, ds: ImageDataset,
                                       outFile: string,
                                       expectedLatent?: number): Promise<ExportInfo> {
  const { encoder, meta } = await loadEncoder(checkpointFile);
  const dim = meta.config.latentSize;
  if (expectedLatent !== undefined && expectedLatent !== dim) {
    throw new Error(`latent size mismatch: checkpoint has F=${dim}, expected F=${expectedLatent}`);
  }
  if (meta.imageSize !== ds.size) {
    throw new Error(`checkpoint expects ${meta.imageSize}x${meta.imageSize} frames, `
      + `dataset has ${ds.size}x${ds.size}`);
  }
  const data = new Float32Array(ds.n * dim);
  const frame = ds.size * ds.size;
  const chunk = 256;
  for (let start = 0; start < ds.n; start += chunk) {
    const count = Math.min(chunk, ds.n - start);
    const batch = tf.tensor4d(ds.images.subarray(start * frame, (start + count) * frame),
                              [count, ds.size, ds.size, 1]);
    const [mu] = encoder.predict(batch) as tf.Tensor[];
    data.set(mu.dataSync() as Float32Array, start * dim);
    batch.dispose();
    mu.dispose();
  }
  const payload = encodeMemb({
    data, labels: ds.labels, nClasses: ds.nClasses, split: ds.split,
    n: ds.n, dim,
  });
  fs.mkdirSync(path.dirname(path.resolve(outFile)), { recursive: true });
  fs.writeFileSync(outFile, payload);
  writeSidecar(outFile, meta, ds);
  return { file: outFile, n: ds.n, dim, nClasses: ds.nClasses };
}

function writeSidecar(outFile: string, meta: Checkpoint, ds: ImageDataset): void {
  const sidecar = {
    config: meta.config,
    imageSize: meta.imageSize,
    n: ds.n,
    nClasses: ds.nClasses,
    finalLoss: meta.history.length ? meta.history[meta.history.length - 1] : null,
  };
  fs.writeFileSync(outFile.replace(/(\.memb)?$/, ".json"),
                   JSON.stringify(sidecar, null, 2) + "\n");
}
