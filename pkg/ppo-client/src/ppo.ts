/**
 * PPO over the eqex environment protocol, for one or both learners
 * (exchange and market maker). Observations are the server's normalized
 * state vectors; training rewards are the server's normalized rewards,
 * while the curve CSV reports raw episode totals like the tabular trainer.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { EnvClient } from './client.js';
import { gae, mean, std } from './math.js';
import { LinearActorCritic, Sample } from './policy.js';
import { Rng } from './rng.js';

export const AGENTS = ['exchange', 'mm'] as const;
export type Agent = (typeof AGENTS)[number];

export interface PpoRunConfig {
  controlled: Agent[];          // which learners PPO trains
  iterations: number;
  episodesPerIteration: number; // batch size in whole episodes
  learningRate: number;
  gamma: number;                // 0.9999 matches the tabular experiments
  lambda: number;               // GAE
  clipRange: number;
  entropyCoef: number;
  valueCoef: number;
  epochsPerBatch: number;
  minibatchSize: number;
  seed: number;
  outDir: string;
}

export const DEFAULT_CONFIG: PpoRunConfig = {
  controlled: ['exchange', 'mm'],
  iterations: 50,
  episodesPerIteration: 4,
  learningRate: 0.05,
  gamma: 0.9999,
  lambda: 0.95,
  clipRange: 0.2,
  entropyCoef: 0.01,
  valueCoef: 0.5,
  epochsPerBatch: 4,
  minibatchSize: 64,
  seed: 0,
  outDir: 'ppo-out',
};

/** Same columns as the tabular trainer's curve CSV so rows join by episode.
 *  For PPO, alpha is the learning rate and epsilon the clip range. */
export const CURVE_FIELDS = [
  'episode', 'alpha', 'epsilon', 'updated',
  'mm_reward', 'ex_reward', 'ex_profit', 'ex_equity',
] as const;

export interface CurveRow {
  episode: number;
  alpha: number;
  epsilon: number;
  updated: string;
  mm_reward: number;
  ex_reward: number;
  ex_profit: number;
  ex_equity: number;
}

export interface IterationStats {
  iteration: number;
  meanReward: { exchange: number; mm: number }; // raw episode totals
}

interface EpisodeRollout {
  samples: Record<Agent, Sample[]>;   // advantages/returns filled in later
  rewards: Record<Agent, number[]>;   // normalized, per step
  values: Record<Agent, number[]>;
  raw: CurveRow;
}

const CHECKPOINT_VERSION = 1;

export class PpoTrainer {
  readonly cfg: PpoRunConfig;
  readonly policies: Record<Agent, LinearActorCritic>;
  private rng: Rng;
  private iteration = 0;
  private globalEpisode = 0;
  private curve: CurveRow[] = [];

  constructor(cfg: PpoRunConfig, obsDims: { exchange: number; mm: number },
              nActions: { exchange: number; mm: number }) {
    this.cfg = cfg;
    this.rng = new Rng(cfg.seed);
    this.policies = {
      exchange: new LinearActorCritic(obsDims.exchange, nActions.exchange,
                                      cfg.learningRate),
      mm: new LinearActorCritic(obsDims.mm, nActions.mm, cfg.learningRate),
    };
  }

  get iterationsDone(): number {
    return this.iteration;
  }

  get curveRows(): CurveRow[] {
    return this.curve;
  }

  private checkpointPath(): string {
    return path.join(this.cfg.outDir, 'checkpoint.json');
  }

  /** Resume from the last checkpoint if one exists in outDir. */
  tryResume(): boolean {
    const p = this.checkpointPath();
    if (!fs.existsSync(p)) return false;
    const data = JSON.parse(fs.readFileSync(p, 'utf-8'));
    if (data.version !== CHECKPOINT_VERSION) {
      throw new Error(`unsupported checkpoint version ${data.version}`);
    }
    this.iteration = data.iteration;
    this.globalEpisode = data.globalEpisode;
    this.curve = data.curve;
    this.rng.setState(data.rng);
    for (const agent of AGENTS) this.policies[agent].setState(data.policies[agent]);
    return true;
  }

  private saveCheckpoint(): void {
    fs.mkdirSync(this.cfg.outDir, { recursive: true });
    const data = {
      version: CHECKPOINT_VERSION,
      iteration: this.iteration,
      globalEpisode: this.globalEpisode,
      rng: this.rng.getState(),
      curve: this.curve,
      policies: {
        exchange: this.policies.exchange.getState(),
        mm: this.policies.mm.getState(),
      },
    };
    const tmp = this.checkpointPath() + '.tmp';
    fs.writeFileSync(tmp, JSON.stringify(data));
    fs.renameSync(tmp, this.checkpointPath());
  }

  private async rollout(client: EnvClient): Promise<EpisodeRollout> {
    const seed = this.cfg.seed * 100_003 + this.globalEpisode;
    let obs = await client.reset(seed, [...this.cfg.controlled]);
    const ep: EpisodeRollout = {
      samples: { exchange: [], mm: [] },
      rewards: { exchange: [], mm: [] },
      values: { exchange: [], mm: [] },
      raw: {
        episode: this.globalEpisode,
        alpha: this.cfg.learningRate,
        epsilon: this.cfg.clipRange,
        updated: this.cfg.controlled.join('+'),
        mm_reward: 0, ex_reward: 0, ex_profit: 0, ex_equity: 0,
      },
    };
    let done = false;
    while (!done) {
      const actions: Record<string, number> = {};
      const picked: Partial<Record<Agent, { action: number; logProb: number; value: number }>> = {};
      for (const agent of this.cfg.controlled) {
        const o = agent === 'exchange' ? obs.exchange : obs.mm;
        const s = this.policies[agent].sample(o, this.rng);
        picked[agent] = s;
        actions[agent] = s.action;
        ep.samples[agent].push({
          obs: o, action: s.action, logProb: s.logProb,
          advantage: 0, return_: 0,
        });
        ep.values[agent].push(s.value);
      }
      const res = await client.step(actions);
      for (const agent of this.cfg.controlled) {
        ep.rewards[agent].push(res.rewards[agent]);
      }
      ep.raw.mm_reward += res.info.raw_rewards.mm;
      ep.raw.ex_reward += res.info.raw_rewards.exchange;
      ep.raw.ex_profit += res.info.ex_profit_reward;
      ep.raw.ex_equity += res.info.ex_equity_reward;
      obs = res.obs;
      done = res.done;
    }
    this.globalEpisode += 1;
    return ep;
  }

  private updateAgent(agent: Agent, episodes: EpisodeRollout[]): void {
    const all: Sample[] = [];
    for (const ep of episodes) {
      const { advantages, returns } = gae(
        ep.rewards[agent], ep.values[agent], this.cfg.gamma, this.cfg.lambda);
      ep.samples[agent].forEach((s, t) => {
        s.advantage = advantages[t];
        s.return_ = returns[t];
      });
      all.push(...ep.samples[agent]);
    }
    const mu = mean(all.map((s) => s.advantage));
    const sigma = std(all.map((s) => s.advantage)) || 1;
    for (const s of all) s.advantage = (s.advantage - mu) / sigma;

    const updateCfg = {
      clipRange: this.cfg.clipRange,
      entropyCoef: this.cfg.entropyCoef,
      valueCoef: this.cfg.valueCoef,
    };
    for (let epoch = 0; epoch < this.cfg.epochsPerBatch; epoch++) {
      this.rng.shuffle(all);
      for (let i = 0; i < all.length; i += this.cfg.minibatchSize) {
        this.policies[agent].update(
          all.slice(i, i + this.cfg.minibatchSize), updateCfg);
      }
    }
  }

  /** One PPO iteration: collect a batch of episodes, update, checkpoint. */
  async runIteration(client: EnvClient): Promise<IterationStats> {
    const episodes: EpisodeRollout[] = [];
    for (let e = 0; e < this.cfg.episodesPerIteration; e++) {
      episodes.push(await this.rollout(client));
    }
    for (const agent of this.cfg.controlled) this.updateAgent(agent, episodes);
    this.curve.push(...episodes.map((ep) => ep.raw));
    this.iteration += 1;
    this.saveCheckpoint();
    return {
      iteration: this.iteration,
      meanReward: {
        exchange: mean(episodes.map((ep) => ep.raw.ex_reward)),
        mm: mean(episodes.map((ep) => ep.raw.mm_reward)),
      },
    };
  }

  async train(client: EnvClient,
              onIteration?: (s: IterationStats) => void): Promise<void> {
    while (this.iteration < this.cfg.iterations) {
      const stats = await this.runIteration(client);
      onIteration?.(stats);
    }
    this.writeCurve();
  }

  writeCurve(): void {
    fs.mkdirSync(this.cfg.outDir, { recursive: true });
    const lines = [CURVE_FIELDS.join(',')];
    for (const row of this.curve) {
      lines.push(CURVE_FIELDS.map((f) => String(row[f])).join(','));
    }
    fs.writeFileSync(path.join(this.cfg.outDir, 'curve_ppo.csv'),
                     lines.join('\n') + '\n');
  }
}

/** Mean raw episode rewards of the uniform-random policy, for baselines. */
export async function randomBaseline(
  client: EnvClient,
  controlled: Agent[],
  nActions: { exchange: number; mm: number },
  episodes: number,
  seed: number,
): Promise<{ exchange: number; mm: number }> {
  const rng = new Rng(seed);
  const totals = { exchange: 0, mm: 0 };
  for (let e = 0; e < episodes; e++) {
    await client.reset(seed * 100_003 + e, [...controlled]);
    let done = false;
    while (!done) {
      const actions: Record<string, number> = {};
      for (const agent of controlled) actions[agent] = rng.int(nActions[agent]);
      const res = await client.step(actions);
      totals.exchange += res.info.raw_rewards.exchange;
      totals.mm += res.info.raw_rewards.mm;
      done = res.done;
    }
  }
  return { exchange: totals.exchange / episodes, mm: totals.mm / episodes };
}
