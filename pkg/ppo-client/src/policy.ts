/**
 * Linear actor-critic with an analytic PPO update.
 *
 * Policy: logits z = W s + b, pi = softmax(z). Value: V(s) = w_v . s + c_v.
 * With a linear model the clipped-surrogate gradient is closed-form, so no
 * autodiff framework is needed and updates are exactly reproducible.
 */

import { Adam, dot, entropy, logSoftmax, softmax } from './math.js';
import { Rng } from './rng.js';

export interface UpdateConfig {
  clipRange: number;    // PPO epsilon
  entropyCoef: number;
  valueCoef: number;
}

export interface Sample {
  obs: number[];
  action: number;
  logProb: number;      // log pi_old(a|s)
  advantage: number;    // normalized
  return_: number;      // GAE return target for the value head
}

export interface UpdateStats {
  policyLoss: number;
  valueLoss: number;
  entropy: number;
  clipFraction: number;
}

export class LinearActorCritic {
  readonly obsDim: number;
  readonly nActions: number;
  /** [W row-major (nActions*obsDim), b (nActions), w_v (obsDim), c_v] */
  params: Float64Array;
  private opt: Adam;

  constructor(obsDim: number, nActions: number, lr: number) {
    this.obsDim = obsDim;
    this.nActions = nActions;
    this.params = new Float64Array(nActions * obsDim + nActions + obsDim + 1);
    this.opt = new Adam(this.params.length, lr);
  }

  logits(obs: number[]): number[] {
    const out = new Array<number>(this.nActions);
    for (let a = 0; a < this.nActions; a++) {
      let z = this.params[this.nActions * this.obsDim + a]; // b[a]
      const row = a * this.obsDim;
      for (let j = 0; j < this.obsDim; j++) z += this.params[row + j] * obs[j];
      out[a] = z;
    }
    return out;
  }

  probs(obs: number[]): number[] {
    return softmax(this.logits(obs));
  }

  value(obs: number[]): number {
    const base = this.nActions * this.obsDim + this.nActions;
    let v = this.params[base + this.obsDim]; // c_v
    for (let j = 0; j < this.obsDim; j++) v += this.params[base + j] * obs[j];
    return v;
  }

  sample(obs: number[], rng: Rng): { action: number; logProb: number; value: number } {
    const p = this.probs(obs);
    const action = rng.categorical(p);
    return { action, logProb: Math.log(p[action]), value: this.value(obs) };
  }

  greedy(obs: number[]): number {
    const z = this.logits(obs);
    let best = 0;
    for (let a = 1; a < z.length; a++) if (z[a] > z[best]) best = a;
    return best;
  }

  /** One clipped-surrogate gradient-ascent step over a minibatch. */
  update(batch: Sample[], cfg: UpdateConfig): UpdateStats {
    const grad = new Float64Array(this.params.length);
    const bOff = this.nActions * this.obsDim;
    const vOff = bOff + this.nActions;
    let policyLoss = 0;
    let valueLoss = 0;
    let entSum = 0;
    let clipped = 0;

    for (const s of batch) {
      const logp = logSoftmax(this.logits(s.obs));
      const pi = logp.map(Math.exp);
      const ratio = Math.exp(logp[s.action] - s.logProb);
      const lo = 1 - cfg.clipRange;
      const hi = 1 + cfg.clipRange;
      const unclipped = ratio * s.advantage;
      const clippedObj = Math.min(Math.max(ratio, lo), hi) * s.advantage;
      policyLoss -= Math.min(unclipped, clippedObj);
      // d min(r A, clip(r) A)/d logits: zero when the clipped branch binds
      const active =
        unclipped <= clippedObj || (ratio >= lo && ratio <= hi);
      if (!active) clipped += 1;
      const h = entropy(pi);
      entSum += h;

      const vPred = this.value(s.obs);
      const vErr = vPred - s.return_;
      valueLoss += vErr * vErr;

      for (let a = 0; a < this.nActions; a++) {
        // policy: A * r * d log pi(action)/dz_a, when the surrogate is active
        let gz = 0;
        if (active) {
          const ind = a === s.action ? 1 : 0;
          gz += s.advantage * ratio * (ind - pi[a]);
        }
        // entropy bonus: dH/dz_a = -pi_a (log pi_a + H)
        gz -= cfg.entropyCoef * pi[a] * (logp[a] + h);
        grad[bOff + a] += gz;
        const row = a * this.obsDim;
        for (let j = 0; j < this.obsDim; j++) grad[row + j] += gz * s.obs[j];
      }
      // value head: ascent on -valueCoef * (v - R)^2
      const gv = -2 * cfg.valueCoef * vErr;
      grad[vOff + this.obsDim] += gv;
      for (let j = 0; j < this.obsDim; j++) grad[vOff + j] += gv * s.obs[j];
    }

    const n = batch.length;
    for (let i = 0; i < grad.length; i++) grad[i] /= n;
    this.opt.step(this.params, grad);

    return {
      policyLoss: policyLoss / n,
      valueLoss: valueLoss / n,
      entropy: entSum / n,
      clipFraction: clipped / n,
    };
  }

  getState(): { params: number[]; opt: ReturnType<Adam['getState']> } {
    return { params: Array.from(this.params), opt: this.opt.getState() };
  }

  setState(s: { params: number[]; opt: ReturnType<Adam['getState']> }): void {
    this.params = Float64Array.from(s.params);
    this.opt.setState(s.opt);
  }
}
