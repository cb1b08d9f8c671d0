/**
 * IDX dataset ingestion (MNIST-layout big-endian image/label pairs).
 *
 * Datasets live under <dataDir>/<name>/ with the four standard files.
 * Images come back normalized to [0, 1]; pixels are reshaped to square
 * single-channel frames and padded to the nearest multiple of 8 so three
 * stride-2 stages divide evenly.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export interface ImageDataset {
  /** [n, size, size, 1] pixel values in [0,1], row-major */
  images: Float32Array;
  /** raw class ids, 0-based as stored in the IDX file */
  labels: Uint32Array;
  /** 0 = train, 1 = test */
  split: Uint8Array;
  n: number;
  size: number;
  nClasses: number;
}

const IMAGES_MAGIC = 0x00000803;
const LABELS_MAGIC = 0x00000801;

function readIdxImages(file: string): { pixels: Uint8Array; n: number; rows: number; cols: number } {
  const buf = fs.readFileSync(file);
  if (buf.length < 16) throw new Error(`${file}: truncated IDX header`);
  const magic = buf.readUInt32BE(0);
  if (magic !== IMAGES_MAGIC) {
    throw new Error(`${file}: image magic 0x${magic.toString(16)} != 0x803`);
  }
  const n = buf.readUInt32BE(4);
  const rows = buf.readUInt32BE(8);
  const cols = buf.readUInt32BE(12);
  const need = 16 + n * rows * cols;
  if (buf.length !== need) throw new Error(`${file}: expected ${need} bytes, got ${buf.length}`);
  return { pixels: new Uint8Array(buf.buffer, buf.byteOffset + 16, n * rows * cols), n, rows, cols };
}

function readIdxLabels(file: string): Uint8Array {
  const buf = fs.readFileSync(file);
  if (buf.length < 8) throw new Error(`${file}: truncated IDX header`);
  const magic = buf.readUInt32BE(0);
  if (magic !== LABELS_MAGIC) {
    throw new Error(`${file}: label magic 0x${magic.toString(16)} != 0x801`);
  }
  const n = buf.readUInt32BE(4);
  if (buf.length !== 8 + n) throw new Error(`${file}: expected ${8 + n} bytes, got ${buf.length}`);
  return new Uint8Array(buf.buffer, buf.byteOffset + 8, n);
}

function padTo(size: number): number {
  return Math.ceil(size / 8) * 8;
}

const FILES = {
  trainImages: "train-images-idx3-ubyte",
  trainLabels: "train-labels-idx1-ubyte",
  testImages: "t10k-images-idx3-ubyte",
  testLabels: "t10k-labels-idx1-ubyte",
};

export function datasetDir(dataDir: string, dataset: string): string {
  return path.join(dataDir, dataset);
}

/** Load train+test IDX pairs, tagging each row with its origin split. */
export function loadDataset(dataDir: string, dataset: string): ImageDataset {
  const dir = datasetDir(dataDir, dataset);
  for (const name of Object.values(FILES)) {
    if (!fs.existsSync(path.join(dir, name))) {
      throw new Error(`dataset '${dataset}' missing: ${path.join(dir, name)} not found`);
    }
  }
  const tr = readIdxImages(path.join(dir, FILES.trainImages));
  const trLab = readIdxLabels(path.join(dir, FILES.trainLabels));
  const te = readIdxImages(path.join(dir, FILES.testImages));
  const teLab = readIdxLabels(path.join(dir, FILES.testLabels));
  if (tr.n !== trLab.length) throw new Error(`train: ${tr.n} images but ${trLab.length} labels`);
  if (te.n !== teLab.length) throw new Error(`test: ${te.n} images but ${teLab.length} labels`);
  if (tr.rows !== te.rows || tr.cols !== te.cols) throw new Error("train/test image geometry differs");
  if (tr.rows !== tr.cols) throw new Error(`images must be square, got ${tr.rows}x${tr.cols}`);

  const n = tr.n + te.n;
  const size = padTo(tr.rows);
  const offset = Math.floor((size - tr.rows) / 2);
  const images = new Float32Array(n * size * size);
  const copyFrame = (pixels: Uint8Array, frame: number, outFrame: number) => {
    const base = frame * tr.rows * tr.cols;
    const outBase = outFrame * size * size;
    for (let r = 0; r < tr.rows; r++) {
      for (let c = 0; c < tr.cols; c++) {
        images[outBase + (r + offset) * size + (c + offset)] = pixels[base + r * tr.cols + c] / 255;
      }
    }
  };
  for (let i = 0; i < tr.n; i++) copyFrame(tr.pixels, i, i);
  for (let i = 0; i < te.n; i++) copyFrame(te.pixels, i, tr.n + i);

  const labels = new Uint32Array(n);
  labels.set(trLab, 0);
  labels.set(teLab, tr.n);
  const split = new Uint8Array(n);
  split.fill(1, tr.n);
  let nClasses = 0;
  for (const lab of labels) nClasses = Math.max(nClasses, lab + 1);
  return { images, labels, split, n, size, nClasses };
}
