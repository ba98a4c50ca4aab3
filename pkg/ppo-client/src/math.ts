/** Small numeric helpers for the linear actor-critic. */

export function softmax(logits: number[]): number[] {
  const m = Math.max(...logits);
  const exps = logits.map((z) => Math.exp(z - m));
  const sum = exps.reduce((a, b) => a + b, 0);
  return exps.map((e) => e / sum);
}

export function logSoftmax(logits: number[]): number[] {
  const m = Math.max(...logits);
  const lse = m + Math.log(logits.reduce((a, z) => a + Math.exp(z - m), 0));
  return logits.map((z) => z - lse);
}

export function entropy(probs: number[]): number {
  let h = 0;
  for (const p of probs) if (p > 0) h -= p * Math.log(p);
  return h;
}

export function dot(a: number[] | Float64Array, b: number[] | Float64Array): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

export function mean(xs: number[]): number {
  return xs.length === 0 ? 0 : xs.reduce((a, b) => a + b, 0) / xs.length;
}

export function std(xs: number[]): number {
  if (xs.length < 2) return 0;
  const mu = mean(xs);
  return Math.sqrt(mean(xs.map((x) => (x - mu) * (x - mu))));
}

/**
 * Adam over one flat parameter vector. Gradients are *ascent* directions
 * (the caller maximizes the PPO objective).
 */
export class Adam {
  readonly lr: number;
  readonly beta1: number;
  readonly beta2: number;
  readonly eps: number;
  private m: Float64Array;
  private v: Float64Array;
  private t = 0;

  constructor(size: number, lr: number, beta1 = 0.9, beta2 = 0.999, eps = 1e-8) {
    this.lr = lr;
    this.beta1 = beta1;
    this.beta2 = beta2;
    this.eps = eps;
    this.m = new Float64Array(size);
    this.v = new Float64Array(size);
  }

  step(params: Float64Array, grad: Float64Array): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let i = 0; i < params.length; i++) {
      this.m[i] = this.beta1 * this.m[i] + (1 - this.beta1) * grad[i];
      this.v[i] = this.beta2 * this.v[i] + (1 - this.beta2) * grad[i] * grad[i];
      const mh = this.m[i] / c1;
      const vh = this.v[i] / c2;
      params[i] += (this.lr * mh) / (Math.sqrt(vh) + this.eps);
    }
  }

  getState(): { m: number[]; v: number[]; t: number } {
    return { m: Array.from(this.m), v: Array.from(this.v), t: this.t };
  }

  setState(s: { m: number[]; v: number[]; t: number }): void {
    this.m = Float64Array.from(s.m);
    this.v = Float64Array.from(s.v);
    this.t = s.t;
  }
}

/**
 * Generalized advantage estimation over one complete episode
 * (terminal bootstrap value 0).
 */
export function gae(
  rewards: number[],
  values: number[],
  gamma: number,
  lambda: number,
): { advantages: number[]; returns: number[] } {
  const n = rewards.length;
  const advantages = new Array<number>(n);
  let adv = 0;
  for (let t = n - 1; t >= 0; t--) {
    const nextValue = t + 1 < n ? values[t + 1] : 0;
    const delta = rewards[t] + gamma * nextValue - values[t];
    adv = delta + gamma * lambda * adv;
    advantages[t] = adv;
  }
  const returns = advantages.map((a, t) => a + values[t]);
  return { advantages, returns };
}
