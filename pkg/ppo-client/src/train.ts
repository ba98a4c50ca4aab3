/**
 * CLI entry point: train PPO against an eqex protocol server.
 *
 * Either attaches to a running server (--host/--port) or spawns one
 * (`python3 -m eqex.envproto --tcp 0`, optionally with --env-config).
 * Writes curve_ppo.csv (tabular-curve schema) and, when --tabular-curve
 * is given, joint_curve.csv aligning both learners' curves by episode.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { parseArgs } from 'node:util';

import { EnvClient, spawnServer } from './client.js';
import { DEFAULT_CONFIG, PpoRunConfig, PpoTrainer } from './ppo.js';

export function loadRunConfig(file?: string,
                              overrides: Partial<PpoRunConfig> = {}): PpoRunConfig {
  let fromFile: Partial<PpoRunConfig> = {};
  if (file) {
    fromFile = JSON.parse(fs.readFileSync(file, 'utf-8'));
    const known = new Set(Object.keys(DEFAULT_CONFIG));
    for (const k of Object.keys(fromFile)) {
      if (!known.has(k)) throw new Error(`unknown config field '${k}'`);
    }
  }
  return { ...DEFAULT_CONFIG, ...fromFile, ...overrides };
}

/** Align PPO and tabular curves row-by-row for a joint reward plot. */
export function writeJointCurve(ppoCsv: string, tabularCsv: string,
                                outPath: string): number {
  const read = (p: string) => {
    const [header, ...rows] = fs.readFileSync(p, 'utf-8').trim().split('\n');
    const cols = header.split(',');
    return rows.map((line) => {
      const vals = line.split(',');
      return Object.fromEntries(cols.map((c, i) => [c, vals[i]]));
    });
  };
  const ppo = read(ppoCsv);
  const tab = read(tabularCsv);
  const n = Math.max(ppo.length, tab.length);
  const lines = ['episode,ppo_mm_reward,ppo_ex_reward,tabular_mm_reward,tabular_ex_reward'];
  for (let i = 0; i < n; i++) {
    lines.push([
      i,
      ppo[i]?.mm_reward ?? '', ppo[i]?.ex_reward ?? '',
      tab[i]?.mm_reward ?? '', tab[i]?.ex_reward ?? '',
    ].join(','));
  }
  fs.writeFileSync(outPath, lines.join('\n') + '\n');
  return n;
}

async function main(): Promise<number> {
  const { values: args } = parseArgs({
    options: {
      config: { type: 'string' },
      host: { type: 'string' },
      port: { type: 'string' },
      'env-config': { type: 'string' },
      python: { type: 'string', default: 'python3' },
      iterations: { type: 'string' },
      seed: { type: 'string' },
      'out-dir': { type: 'string' },
      'tabular-curve': { type: 'string' },
      resume: { type: 'boolean', default: false },
    },
  });

  const overrides: Partial<PpoRunConfig> = {};
  if (args.iterations) overrides.iterations = Number(args.iterations);
  if (args.seed) overrides.seed = Number(args.seed);
  if (args['out-dir']) overrides.outDir = args['out-dir'];
  const cfg = loadRunConfig(args.config, overrides);

  let server: Awaited<ReturnType<typeof spawnServer>> | undefined;
  let host = args.host;
  let port = args.port ? Number(args.port) : undefined;
  if (!host || !port) {
    const serverArgs = args['env-config'] ? ['--config', args['env-config']] : [];
    server = await spawnServer(serverArgs, args.python);
    host = server.host;
    port = server.port;
    console.error(`spawned server on ${host}:${port}`);
  }

  const client = await EnvClient.connect(host, port);
  try {
    const spec = await client.hello();
    const trainer = new PpoTrainer(cfg, {
      exchange: spec.state_components.exchange.length,
      mm: spec.state_components.mm.length,
    }, {
      exchange: spec.exchange_actions.length,
      mm: spec.mm_actions.length,
    });
    if (args.resume && trainer.tryResume()) {
      console.error(`resumed at iteration ${trainer.iterationsDone}`);
    }
    await trainer.train(client, (s) => {
      console.error(
        `iter ${s.iteration}/${cfg.iterations} ` +
        `mean ex reward ${s.meanReward.exchange.toFixed(4)} ` +
        `mm reward ${s.meanReward.mm.toFixed(4)}`);
    });
    const curvePath = path.join(cfg.outDir, 'curve_ppo.csv');
    console.log(`curve written to ${curvePath}`);
    if (args['tabular-curve']) {
      const jointPath = path.join(cfg.outDir, 'joint_curve.csv');
      writeJointCurve(curvePath, args['tabular-curve'], jointPath);
      console.log(`joint curve written to ${jointPath}`);
    }
  } finally {
    await client.close().catch(() => undefined);
    server?.stop();
  }
  return 0;
}

const isMain = process.argv[1] &&
  path.resolve(process.argv[1]) === new URL(import.meta.url).pathname;
if (isMain) {
  main().then(
    (code) => process.exit(code),
    (err) => {
      console.error(err instanceof Error ? err.message : err);
      process.exit(1);
    },
  );
}
