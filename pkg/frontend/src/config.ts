/**
 * Training configuration for the convolutional VAE.
 *
 * Latent sizes and block depths come from fixed menus; the per-dataset
 * presets mirror the published protocol (batch 64, 50 epochs, Adam, and
 * dataset-specific learning rate / latent size / block depths). The
 * encoder and decoder always share the same block structure, mirrored.
 */

export const LATENT_MENU = [32, 64, 128, 256, 364, 512, 1024] as const;
export const MIN_BLOCK_DEPTH = 1;
export const MAX_BLOCK_DEPTH = 5;

export interface VaeConfig {
  dataset: string;
  latentSize: number;
  /** conv layers per block; three blocks, each followed by a downsample */
  blocks: [number, number, number];
  learningRate: number;
  batchSize: number;
  epochs: number;
  klWeight: number;
  seed: number;
  /** root directory holding <dataset>/ IDX files */
  dataDir: string;
  /** channel widths of the three blocks; capacity knob, protocol default */
  channels?: [number, number, number];
}

export const DEFAULTS: Omit<VaeConfig, "dataset" | "latentSize" | "blocks" | "learningRate"> = {
  batchSize: 64,
  epochs: 50,
  klWeight: 1e-3,
  seed: 0,
  dataDir: "data",
};

/** Published per-dataset settings: latent size, blocks, learning rate. */
export const PRESETS: Record<string, Pick<VaeConfig, "latentSize" | "blocks" | "learningRate">> = {
  mnist: { latentSize: 128, blocks: [3, 3, 1], learningRate: 1e-4 },
  fmnist: { latentSize: 256, blocks: [3, 3, 1], learningRate: 1e-4 },
  cifar10: { latentSize: 1024, blocks: [4, 5, 2], learningRate: 1e-4 },
  fer2013: { latentSize: 64, blocks: [3, 3, 3], learningRate: 3e-4 },
  celeba: { latentSize: 128, blocks: [3, 3, 3], learningRate: 3e-4 },
  pathmnist: { latentSize: 128, blocks: [3, 3, 1], learningRate: 1e-4 },
};

export function presetConfig(dataset: string, overrides: Partial<VaeConfig> = {}): VaeConfig {
  const preset = PRESETS[dataset];
  if (!preset) {
    throw new Error(`no preset for dataset '${dataset}'; known: ${Object.keys(PRESETS).join(", ")}`);
  }
  return validateConfig({ dataset, ...DEFAULTS, ...preset, ...overrides });
}

export function validateConfig(cfg: VaeConfig): VaeConfig {
  if (!(LATENT_MENU as readonly number[]).includes(cfg.latentSize)) {
    throw new Error(`latent size ${cfg.latentSize} not in menu [${LATENT_MENU.join(", ")}]`);
  }
  if (cfg.blocks.length !== 3) {
    throw new Error(`expected three conv blocks, got ${cfg.blocks.length}`);
  }
  for (const depth of cfg.blocks) {
    if (!Number.isInteger(depth) || depth < MIN_BLOCK_DEPTH || depth > MAX_BLOCK_DEPTH) {
      throw new Error(`block depth ${depth} outside ${MIN_BLOCK_DEPTH}..${MAX_BLOCK_DEPTH}`);
    }
  }
  if (cfg.learningRate <= 0) throw new Error(`learning rate must be positive, got ${cfg.learningRate}`);
  if (cfg.batchSize < 1) throw new Error(`batch size must be >= 1, got ${cfg.batchSize}`);
  if (cfg.epochs < 1) throw new Error(`epochs must be >= 1, got ${cfg.epochs}`);
  if (cfg.klWeight < 0) throw new Error(`KL weight must be >= 0, got ${cfg.klWeight}`);
  if (cfg.channels && (cfg.channels.length !== 3 || cfg.channels.some((c) => c < 1))) {
    throw new Error(`channels must be three positive widths, got ${cfg.channels}`);
  }
  return cfg;
}
