/**
 * Client for the eqex environment protocol: newline-delimited JSON over TCP.
 * Requests are strictly serialized (the server answers one line per line).
 */

import { spawn, ChildProcess } from 'node:child_process';
import * as net from 'node:net';
import * as readline from 'node:readline';

export interface SpecMsg {
  type: 'spec';
  version: string;
  exchange_actions: unknown[];
  mm_actions: unknown[];
  state_components: { mm: string[]; exchange: string[] };
  [k: string]: unknown;
}

export interface Obs {
  mm: number[];
  exchange: number[];
}

export interface StepResult {
  type: 'step_result';
  t: number;
  done: boolean;
  obs: Obs;
  rewards: { mm: number; exchange: number };
  info: {
    raw_rewards: { mm: number; exchange: number };
    ex_profit_reward: number;
    ex_equity_reward: number;
    traded_qty: number;
    episode_raw_reward_totals?: { mm: number; exchange: number };
    final_profits?: Record<string, number>;
    final_neg_gew?: number;
    [k: string]: unknown;
  };
}

export class ProtocolError extends Error {}

export class EnvClient {
  private socket: net.Socket;
  private lines: readline.Interface;
  private pending: Array<{
    resolve: (msg: Record<string, unknown>) => void;
    reject: (err: Error) => void;
  }> = [];

  private constructor(socket: net.Socket) {
    this.socket = socket;
    this.lines = readline.createInterface({ input: socket });
    this.lines.on('line', (line) => {
      const waiter = this.pending.shift();
      if (!waiter) return;
      try {
        waiter.resolve(JSON.parse(line));
      } catch (err) {
        waiter.reject(err as Error);
      }
    });
    socket.on('error', (err) => this.failAll(err));
    socket.on('close', () => this.failAll(new ProtocolError('connection closed')));
  }

  private failAll(err: Error): void {
    const waiting = this.pending;
    this.pending = [];
    for (const w of waiting) w.reject(err);
  }

  static connect(host: string, port: number): Promise<EnvClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port }, () =>
        resolve(new EnvClient(socket)),
      );
      socket.on('error', reject);
    });
  }

  private request(msg: Record<string, unknown>): Promise<Record<string, unknown>> {
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.socket.write(JSON.stringify(msg) + '\n');
    });
  }

  private async expect<T extends { type: string }>(
    msg: Record<string, unknown>,
    type: string,
  ): Promise<T> {
    const resp = (await this.request(msg)) as { type: string; message?: string };
    if (resp.type !== type) {
      throw new ProtocolError(
        `expected ${type}, got ${resp.type}${resp.message ? `: ${resp.message}` : ''}`,
      );
    }
    return resp as T;
  }

  hello(): Promise<SpecMsg> {
    return this.expect<SpecMsg>({ type: 'hello', version: 'v1' }, 'spec');
  }

  async reset(seed: number, controlled: string[]): Promise<Obs> {
    const resp = await this.expect<{ type: 'observation'; obs: Obs }>(
      { type: 'reset', seed, controlled },
      'observation',
    );
    return resp.obs;
  }

  step(actions: Record<string, number>): Promise<StepResult> {
    return this.expect<StepResult>({ type: 'step', actions }, 'step_result');
  }

  async close(): Promise<void> {
    try {
      await this.expect({ type: 'close' }, 'closed');
    } finally {
      this.socket.end();
      this.lines.close();
    }
  }
}

export interface SpawnedServer {
  host: string;
  port: number;
  proc: ChildProcess;
  stop(): void;
}

/**
 * Launch `python3 -m eqex.envproto --tcp 0 ...` and wait for its
 * "listening on host:port" line on stderr.
 */
export function spawnServer(
  extraArgs: string[] = [],
  pythonBin = 'python3',
): Promise<SpawnedServer> {
  const proc = spawn(pythonBin, ['-m', 'eqex.envproto', '--tcp', '0', ...extraArgs], {
    stdio: ['ignore', 'ignore', 'pipe'],
  });
  return new Promise((resolve, reject) => {
    let buffered = '';
    const onData = (chunk: Buffer) => {
      buffered += chunk.toString();
      const m = buffered.match(/listening on ([\w.]+):(\d+)/);
      if (m) {
        proc.stderr!.off('data', onData);
        resolve({
          host: m[1],
          port: Number(m[2]),
          proc,
          stop: () => proc.kill(),
        });
      }
    };
    proc.stderr!.on('data', onData);
    proc.on('error', reject);
    proc.on('exit', (code) => {
      reject(new ProtocolError(`server exited before ready (code ${code}): ${buffered}`));
    });
  });
}
