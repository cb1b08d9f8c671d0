/**
 * MEMB embedding interchange format (little-endian):
 *
 *   "MEMB" | version u32 = 1 | n u64 | F u64 | C u32 | flags u32 |
 *   data f32[n*F] row-major | labels u32[n] (0-based) |
 *   split u8[n] (0=train, 1=test; present iff flags bit 0)
 *
 * This is the single contract with the downstream graph/GNN component;
 * the byte layout here must never drift from its reader.
 */

export const MEMB_MAGIC = "MEMB";
export const MEMB_VERSION = 1;
const SPLIT_FLAG = 1;
const HEADER_BYTES = 4 + 4 + 8 + 8 + 4 + 4;

export interface EmbeddingFile {
  data: Float32Array; // n * dim, row-major
  labels: Uint32Array; // 0-based class ids
  nClasses: number;
  split: Uint8Array | null;
  n: number;
  dim: number;
}

export function encodeMemb(emb: EmbeddingFile): Buffer {
  const { n, dim, nClasses } = emb;
  if (emb.data.length !== n * dim) {
    throw new Error(`data has ${emb.data.length} floats, expected ${n * dim}`);
  }
  if (emb.labels.length !== n) throw new Error(`${emb.labels.length} labels for ${n} rows`);
  if (emb.split && emb.split.length !== n) throw new Error(`${emb.split.length} split tags for ${n} rows`);
  for (const v of emb.data) {
    if (!Number.isFinite(v)) throw new Error("embedding data contains non-finite entries");
  }
  for (const lab of emb.labels) {
    if (lab >= nClasses) throw new Error(`label ${lab} out of range for ${nClasses} classes`);
  }
  const total = HEADER_BYTES + 4 * n * dim + 4 * n + (emb.split ? n : 0);
  const buf = Buffer.alloc(total);
  let off = buf.write(MEMB_MAGIC, 0, "ascii");
  off = buf.writeUInt32LE(MEMB_VERSION, off);
  off = buf.writeBigUInt64LE(BigInt(n), off);
  off = buf.writeBigUInt64LE(BigInt(dim), off);
  off = buf.writeUInt32LE(nClasses, off);
  off = buf.writeUInt32LE(emb.split ? SPLIT_FLAG : 0, off);
  Buffer.from(emb.data.buffer, emb.data.byteOffset, 4 * n * dim).copy(buf, off);
  off += 4 * n * dim;
  Buffer.from(emb.labels.buffer, emb.labels.byteOffset, 4 * n).copy(buf, off);
  off += 4 * n;
  if (emb.split) {
    Buffer.from(emb.split.buffer, emb.split.byteOffset, n).copy(buf, off);
  }
  return buf;
}

export function decodeMemb(buf: Buffer): EmbeddingFile {
  if (buf.length < 4 || buf.toString("ascii", 0, 4) !== MEMB_MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(buf.toString("ascii", 0, 4))}`);
  }
  if (buf.length < HEADER_BYTES) throw new Error("file ends inside the header");
  const version = buf.readUInt32LE(4);
  if (version !== MEMB_VERSION) throw new Error(`unsupported MEMB version ${version}`);
  const n = Number(buf.readBigUInt64LE(8));
  const dim = Number(buf.readBigUInt64LE(16));
  const nClasses = buf.readUInt32LE(24);
  const flags = buf.readUInt32LE(28);
  const hasSplit = (flags & SPLIT_FLAG) !== 0;
  const need = HEADER_BYTES + 4 * n * dim + 4 * n + (hasSplit ? n : 0);
  if (buf.length < need) throw new Error(`payload is ${buf.length} bytes, format needs ${need}`);
  if (buf.length > need) throw new Error(`${buf.length - need} trailing bytes after payload`);
  let off = HEADER_BYTES;
  const data = new Float32Array(n * dim);
  for (let i = 0; i < n * dim; i++) data[i] = buf.readFloatLE(off + 4 * i);
  off += 4 * n * dim;
  const labels = new Uint32Array(n);
  for (let i = 0; i < n; i++) labels[i] = buf.readUInt32LE(off + 4 * i);
  off += 4 * n;
  let split: Uint8Array | null = null;
  if (hasSplit) {
    split = new Uint8Array(n);
    for (let i = 0; i < n; i++) split[i] = buf.readUInt8(off + i);
  }
  for (const lab of labels) {
    if (lab >= nClasses) throw new Error(`stored label ${lab} out of range for C=${nClasses}`);
  }
  return { data, labels, nClasses, split, n, dim };
}
