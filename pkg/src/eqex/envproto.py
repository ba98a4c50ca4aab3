"""Line-delimited JSON protocol exposing the market game to external
trainers.

One request line yields exactly one response line. A client controls any
subset of {"exchange", "mm"}; uncontrolled learners act from built-in
policies (greedy over a loaded Q checkpoint, or a fixed default action).
Observations are the normalized state vectors and rewards the normalized
per-step values, exactly what the built-in tabular trainer consumes.

Message flow:
  {"type": "hello", "version": "v1"}        -> spec
  {"type": "reset", "seed": 0,
   "controlled": ["exchange", "mm"]}        -> observation
  {"type": "step", "actions": {...}}        -> step_result
  {"type": "close"}                         -> closed
Unknown fields are ignored; malformed lines produce an error response and
the session continues.
"""

import argparse
import json
import socketserver
import sys

from .config import ExperimentConfig, load_config
from .kernel import MarketSim
from .learn import Calibration, Discretizer, QTable, calibrate
from .mechanism import (EX_STATE_COMPONENTS, MM_STATE_COMPONENTS,
                        EXCHANGE_ACTIONS, MM_ACTIONS)

PROTOCOL_VERSION = "v1"
AGENTS = ("exchange", "mm")


def _norm_reward(value, bounds):
    lo, hi = bounds
    return max(-1.0, min(1.0, 2.0 * (value - lo) / (hi - lo) - 1.0))


class Session:
    """Protocol state machine for one client connection."""

    def __init__(self, config: ExperimentConfig, calibration: Calibration,
                 q_ex: QTable | None = None, q_mm: QTable | None = None):
        self.config = config
        self.calibration = calibration
        self.norm = calibration.normalizer()
        self.disc_ex = Discretizer(calibration, EX_STATE_COMPONENTS)
        self.disc_mm = Discretizer(calibration, MM_STATE_COMPONENTS)
        self.q_ex = q_ex
        self.q_mm = q_mm
        self.sim = MarketSim(config)
        self.controlled: set[str] = set(AGENTS)
        self.started = False
        self.done = False
        self._raw_states = None
        self._episode = {a: 0.0 for a in AGENTS}

    # -- per-message handling -------------------------------------------

    def handle_line(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            return {"type": "error", "message": "malformed JSON line"}
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "error", "message": "missing required field 'type'"}
        handler = getattr(self, f"_on_{msg['type']}", None)
        if handler is None:
            return {"type": "error",
                    "message": f"unknown request type '{msg['type']}'"}
        try:
            return handler(msg)
        except KeyError as exc:
            return {"type": "error", "message": f"missing required field {exc}"}

    def _on_hello(self, msg) -> dict:
        return {
            "type": "spec",
            "version": PROTOCOL_VERSION,
            "exchange_actions": [[a.fee_cents, a.incentive_cents]
                                 for a in EXCHANGE_ACTIONS],
            "mm_actions": [[h, d] for h, d in MM_ACTIONS],
            "state_components": {"exchange": list(EX_STATE_COMPONENTS),
                                 "mm": list(MM_STATE_COMPONENTS)},
        }

    def _on_reset(self, msg) -> dict:
        seed = msg["seed"]
        controlled = msg.get("controlled", list(AGENTS))
        bad = set(controlled) - set(AGENTS)
        if bad:
            return {"type": "error",
                    "message": f"unknown controlled agent(s) {sorted(bad)}"}
        self.controlled = set(controlled)
        mm_state, ex_state = self.sim.reset(seed)
        self._raw_states = (mm_state, ex_state)
        self.started = True
        self.done = False
        self._episode = {a: 0.0 for a in AGENTS}
        return {"type": "observation", "t": 0, "done": False,
                "obs": self._obs()}

    def _on_step(self, msg) -> dict:
        if not self.started:
            return {"type": "error", "message": "no episode: send reset first"}
        if self.done:
            return {"type": "error",
                    "message": "episode done: send reset to start a new one"}
        actions = msg["actions"]
        mm_state, ex_state = self._raw_states
        try:
            a_ex = self._resolve_action("exchange", actions, ex_state)
            a_mm = self._resolve_action("mm", actions, mm_state)
        except _ActionError as exc:
            return {"type": "error", "message": str(exc)}
        rec = self.sim.step(a_ex, a_mm)
        self._raw_states = (rec.mm_state, rec.ex_state)
        self.done = self.sim.done
        rb = self.calibration.reward_bounds
        self._episode["mm"] += rec.mm_reward
        self._episode["exchange"] += rec.ex_reward
        resp = {
            "type": "step_result",
            "t": rec.t,
            "done": self.done,
            "obs": self._obs(),
            "rewards": {"mm": _norm_reward(rec.mm_reward, rb["mm_reward"]),
                        "exchange": _norm_reward(rec.ex_reward, rb["ex_reward"])},
            "info": {
                "raw_rewards": {"mm": rec.mm_reward, "exchange": rec.ex_reward},
                "ex_profit_reward": rec.ex_profit_reward,
                "ex_equity_reward": rec.ex_equity_reward,
                "traded_qty": rec.traded_qty,
                "raw_state": rec.mm_state,
            },
        }
        if self.done:
            resp["info"]["episode_raw_reward_totals"] = dict(self._episode)
            ep = self.sim.finish([])
            resp["info"]["final_profits"] = {
                str(k): v for k, v in ep.final_profits.items()}
            resp["info"]["final_neg_gew"] = ep.final_neg_gew
        return resp

    def _on_close(self, msg) -> dict:
        self.started = False
        return {"type": "closed"}

    # -- helpers ---------------------------------------------------------

    def _resolve_action(self, agent: str, actions: dict, raw_state: dict) -> int:
        n = len(EXCHANGE_ACTIONS) if agent == "exchange" else len(MM_ACTIONS)
        if agent in self.controlled:
            if agent not in actions:
                raise _ActionError(f"missing action for controlled agent '{agent}'")
            a = actions[agent]
            if not isinstance(a, int) or not 0 <= a < n:
                raise _ActionError(
                    f"action {a!r} for agent '{agent}' outside [0, {n})")
            return a
        table = self.q_ex if agent == "exchange" else self.q_mm
        if table is None:
            return 0
        disc = self.disc_ex if agent == "exchange" else self.disc_mm
        return table.greedy(disc(raw_state))

    def _obs(self) -> dict:
        mm_state, ex_state = self._raw_states
        return {
            "mm": list(self.norm.normalize_vector(mm_state, MM_STATE_COMPONENTS)),
            "exchange": list(self.norm.normalize_vector(ex_state, EX_STATE_COMPONENTS)),
        }


class _ActionError(Exception):
    pass


# -- transports ----------------------------------------------------------

def serve_stdio(make_session) -> None:
    session = make_session()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        resp = session.handle_line(line)
        sys.stdout.write(json.dumps(resp) + "\n")
        sys.stdout.flush()
        if resp.get("type") == "closed":
            break


def serve_tcp(make_session, host: str, port: int, ready_fh=None):
    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            session = make_session()
            for raw in self.rfile:
                line = raw.decode().strip()
                if not line:
                    continue
                resp = session.handle_line(line)
                self.wfile.write((json.dumps(resp) + "\n").encode())
                if resp.get("type") == "closed":
                    break

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    server = Server((host, port), Handler)
    if ready_fh is not None:
        print(f"listening on {server.server_address[0]}:{server.server_address[1]}",
              file=ready_fh, flush=True)
    return server


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="eqex-serve", description="market game protocol server")
    p.add_argument("--config")
    p.add_argument("--calibration")
    p.add_argument("--cal-seed", type=int, default=0)
    p.add_argument("--qex", help="exchange Q checkpoint for the built-in policy")
    p.add_argument("--qmm", help="MM Q checkpoint for the built-in policy")
    p.add_argument("--tcp", type=int, metavar="PORT",
                   help="listen on TCP instead of stdio (0 picks a free port)")
    p.add_argument("--host", default="127.0.0.1")
    args = p.parse_args(argv)

    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.calibration:
        calibration = Calibration.load(args.calibration)
    else:
        calibration = calibrate(config, args.cal_seed)
    q_ex = QTable.load(args.qex, len(EXCHANGE_ACTIONS)) if args.qex else None
    q_mm = QTable.load(args.qmm, len(MM_ACTIONS)) if args.qmm else None

    def make_session():
        return Session(config, calibration, q_ex=q_ex, q_mm=q_mm)

    if args.tcp is not None:
        server = serve_tcp(make_session, args.host, args.tcp, ready_fh=sys.stderr)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
    else:
        serve_stdio(make_session)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
