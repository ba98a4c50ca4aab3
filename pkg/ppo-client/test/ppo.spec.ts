import { describe, expect, it } from 'vitest';

import { gae, mean, std } from '../src/math.js';
import { LinearActorCritic, Sample } from '../src/policy.js';
import { Rng } from '../src/rng.js';

const UPDATE = { clipRange: 0.2, entropyCoef: 0.01, valueCoef: 0.5 };

/**
 * Contextual bandit oracle: context [1,0] rewards action 0, context [0,1]
 * rewards action 1. A correct clipped-surrogate implementation must push
 * each context's probability mass to its rewarded action.
 */
function trainOnBandit(seed: number, rounds: number): LinearActorCritic {
  const pi = new LinearActorCritic(2, 2, 0.1);
  const rng = new Rng(seed);
  const contexts = [
    [1, 0],
    [0, 1],
  ];
  for (let round = 0; round < rounds; round++) {
    const batch: Sample[] = [];
    const values: number[] = [];
    const rewards: number[] = [];
    for (let i = 0; i < 32; i++) {
      const obs = contexts[rng.int(2)];
      const s = pi.sample(obs, rng);
      const reward = s.action === (obs[0] === 1 ? 0 : 1) ? 1 : 0;
      // single-step episodes: GAE degenerates to reward - value
      const { advantages, returns } = gae([reward], [s.value], 0.99, 0.95);
      batch.push({
        obs, action: s.action, logProb: s.logProb,
        advantage: advantages[0], return_: returns[0],
      });
      values.push(s.value);
      rewards.push(reward);
    }
    const mu = mean(batch.map((s) => s.advantage));
    const sigma = std(batch.map((s) => s.advantage)) || 1;
    for (const s of batch) s.advantage = (s.advantage - mu) / sigma;
    pi.update(batch, UPDATE);
  }
  return pi;
}

describe('LinearActorCritic', () => {
  it('starts uniform with zero value', () => {
    const pi = new LinearActorCritic(3, 4, 0.01);
    const p = pi.probs([0.2, -0.4, 1.0]);
    for (const x of p) expect(x).toBeCloseTo(0.25, 12);
    expect(pi.value([0.2, -0.4, 1.0])).toBe(0);
  });

  it('update moves probability toward positive-advantage actions', () => {
    const pi = new LinearActorCritic(1, 2, 0.05);
    const before = pi.probs([1])[0];
    const batch: Sample[] = [
      { obs: [1], action: 0, logProb: Math.log(0.5), advantage: 1, return_: 1 },
      { obs: [1], action: 1, logProb: Math.log(0.5), advantage: -1, return_: 0 },
    ];
    for (let i = 0; i < 20; i++) pi.update(batch, UPDATE);
    expect(pi.probs([1])[0]).toBeGreaterThan(before);
  });

  it('clipping freezes the policy gradient far from the old policy', () => {
    const pi = new LinearActorCritic(1, 2, 0.05);
    // old logProb claims the action had tiny probability -> ratio >> 1+clip
    const batch: Sample[] = [
      { obs: [1], action: 0, logProb: Math.log(1e-6), advantage: 1, return_: 0 },
    ];
    const stats = pi.update(batch, { ...UPDATE, entropyCoef: 0, valueCoef: 0 });
    expect(stats.clipFraction).toBe(1);
  });

  it('solves the contextual bandit', () => {
    const pi = trainOnBandit(0, 120);
    expect(pi.probs([1, 0])[0]).toBeGreaterThan(0.9);
    expect(pi.probs([0, 1])[1]).toBeGreaterThan(0.9);
    // value head learns the (near-1) expected reward in both contexts
    expect(pi.value([1, 0])).toBeGreaterThan(0.5);
    expect(pi.value([0, 1])).toBeGreaterThan(0.5);
  });

  it('is deterministic for a fixed seed', () => {
    const a = trainOnBandit(5, 30);
    const b = trainOnBandit(5, 30);
    expect(Array.from(a.params)).toEqual(Array.from(b.params));
    const c = trainOnBandit(6, 30);
    expect(Array.from(c.params)).not.toEqual(Array.from(a.params));
  });

  it('policy state round-trips', () => {
    const a = trainOnBandit(1, 10);
    const b = new LinearActorCritic(2, 2, 0.1);
    b.setState(a.getState());
    expect(b.probs([1, 0])).toEqual(a.probs([1, 0]));
  });
});
