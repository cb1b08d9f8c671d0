/**
 * Command line: `train` fits the VAE for a dataset preset and saves the
 * encoder checkpoint; `export` maps a dataset through a checkpoint into
 * a MEMB embedding file the downstream graph component consumes.
 *
 *   node dist/cli.js train  --dataset mnist --data-dir data --out runs/mnist.ckpt.json
 *   node dist/cli.js export --dataset mnist --data-dir data \
 *       --checkpoint runs/mnist.ckpt.json --out runs/mnist.memb
 */

import { presetConfig, VaeConfig } from "./config.js";
import { loadDataset } from "./data.js";
import { exportEmbeddings } from "./export.js";
import { saveEncoder, trainVae } from "./train.js";

function parseArgs(argv: string[]): { command: string; flags: Map<string, string> } {
  const [command, ...rest] = argv;
  const flags = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    if (!key.startsWith("--") || i + 1 >= rest.length) {
      throw new Error(`expected --flag value pairs, got '${rest.slice(i).join(" ")}'`);
    }
    flags.set(key.slice(2), rest[i + 1]);
  }
  return { command, flags };
}

function configFrom(flags: Map<string, string>): VaeConfig {
  const dataset = flags.get("dataset") ?? "mnist";
  const overrides: Record<string, unknown> = {};
  if (flags.has("epochs")) overrides.epochs = Number(flags.get("epochs"));
  if (flags.has("batch-size")) overrides.batchSize = Number(flags.get("batch-size"));
  if (flags.has("lr")) overrides.learningRate = Number(flags.get("lr"));
  if (flags.has("latent")) overrides.latentSize = Number(flags.get("latent"));
  if (flags.has("kl-weight")) overrides.klWeight = Number(flags.get("kl-weight"));
  if (flags.has("seed")) overrides.seed = Number(flags.get("seed"));
  if (flags.has("data-dir")) overrides.dataDir = flags.get("data-dir");
  if (flags.has("channels")) {
    overrides.channels = flags.get("channels")!.split(",").map(Number);
  }
  return presetConfig(dataset, overrides as Partial<VaeConfig>);
}

async function main(): Promise<number> {
  const { command, flags } = parseArgs(process.argv.slice(2));
  if (command === "train") {
    const cfg = configFrom(flags);
    const out = flags.get("out") ?? `runs/${cfg.dataset}.ckpt.json`;
    const ds = loadDataset(cfg.dataDir, cfg.dataset);
    console.log(`training ${cfg.dataset}: n=${ds.n}, frames ${ds.size}x${ds.size}, `
      + `latent ${cfg.latentSize}, blocks [${cfg.blocks.join(", ")}]`);
    const result = trainVae(cfg, ds, (log) => {
      console.log(`epoch ${log.epoch}: loss=${log.loss.toFixed(4)} `
        + `recon=${log.reconstruction.toFixed(4)} kl=${log.kl.toFixed(4)}`);
    });
    await saveEncoder(result, cfg, out);
    console.log(`encoder checkpoint -> ${out}`);
    return 0;
  }
  if (command === "export") {
    const cfg = configFrom(flags);
    const checkpoint = flags.get("checkpoint");
    if (!checkpoint) throw new Error("export needs --checkpoint <file>");
    const out = flags.get("out") ?? `runs/${cfg.dataset}.memb`;
    const ds = loadDataset(cfg.dataDir, cfg.dataset);
    const info = await exportEmbeddings(checkpoint, ds, out, cfg.latentSize);
    console.log(`embeddings -> ${info.file} (n=${info.n}, F=${info.dim}, C=${info.nClasses})`);
    return 0;
  }
  console.error(`unknown command '${command}'; use train or export`);
  return 2;
}

main().then((code) => { process.exitCode = code; },
            (err) => { console.error(String(err?.message ?? err)); process.exitCode = 1; });
