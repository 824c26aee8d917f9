"""Wire-protocol environment service, baseline policies, and metrics.

The service speaks newline-delimited JSON, one message per line, over stdio
or TCP.  Requests are {hello, reset, step, close} with strictly increasing
integer ids; every request gets exactly one response carrying the same id.
A malformed line produces an error response and leaves the session intact.
"""

from __future__ import annotations

import csv
import io
import json
import math
import socketserver
import sys
from dataclasses import dataclass

import numpy as np

from .channel import unflatten_csi
from .env import Environment, EpisodeTrace, StateObs, encode_action, run_episode
from .env import Action, action_length, obs_length
from .scenario import ScenarioConfig
from .signal_model import matched_solution

PROTOCOL_VERSION = 1

REQUEST_KINDS = ("hello", "reset", "step", "close")
RESPONSE_KINDS = ("obs_spec", "obs", "result", "error")


class ProtocolError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def encode_message(msg: dict) -> str:
    """Serialize one message to a single line (no trailing newline)."""
    return json.dumps(msg, separators=(",", ":"), allow_nan=True)


def decode_message(line: str) -> dict:
    """Parse and validate one protocol line."""
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError("bad-message", f"invalid JSON: {exc}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("bad-message", "message must be an object")
    kind = msg.get("kind")
    if kind not in REQUEST_KINDS + RESPONSE_KINDS:
        raise ProtocolError("bad-message", f"unknown kind {kind!r}")
    if not isinstance(msg.get("id"), int):
        raise ProtocolError("bad-message", "missing integer id")
    return msg


def _spec_payload(cfg: ScenarioConfig) -> dict:
    return {
        "protocol": PROTOCOL_VERSION,
        "M": cfg.M, "K": cfg.K, "F": cfg.F, "N": cfg.N,
        "F1": cfg.F1, "F2": cfg.F2, "N1": cfg.N1, "N2": cfg.N2,
        "L": cfg.L,
        "obs_len": obs_length(cfg), "action_len": action_length(cfg),
        "v_max": cfg.v_max, "slot_dt": cfg.slot_dt,
        "p_dl": cfg.P_dl, "p_ul": cfg.P_ul,
        "area_x": cfg.area_x, "area_y": cfg.area_y,
    }


def _json_info(info: dict) -> dict:
    out = {}
    for key in ("min_rate", "boundary", "power_used", "clamped", "slot"):
        v = info[key]
        out[key] = bool(v) if key == "boundary" else v
    out["rates"] = [float(r) for r in info["rates"]]
    out["uav_pos"] = [float(v) for v in info["uav_pos"]]
    return out


class Session:
    """One client's request/response state machine over a private env."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.env = Environment(cfg)
        self.active = False
        self.last_id = -1
        self.closed = False

    def handle_line(self, line: str) -> str:
        line = line.strip()
        if not line:
            return ""
        try:
            msg = decode_message(line)
        except ProtocolError as exc:
            return encode_message({"kind": "error", "id": -1,
                                   "code": exc.code, "message": str(exc)})
        mid = msg["id"]
        if mid <= self.last_id:
            return encode_message({
                "kind": "error", "id": mid, "code": "bad-id",
                "message": f"id {mid} not greater than {self.last_id}"})
        self.last_id = mid
        try:
            return encode_message(self._dispatch(msg))
        except ProtocolError as exc:
            return encode_message({"kind": "error", "id": mid,
                                   "code": exc.code, "message": str(exc)})
        except Exception as exc:  # env errors must not kill the session
            return encode_message({"kind": "error", "id": mid,
                                   "code": "internal", "message": str(exc)})

    def _dispatch(self, msg: dict) -> dict:
        kind, mid = msg["kind"], msg["id"]
        if kind == "hello":
            out = {"kind": "obs_spec", "id": mid}
            out.update(_spec_payload(self.cfg))
            return out
        if kind == "reset":
            seed = msg.get("seed", self.cfg.seed)
            if not isinstance(seed, int):
                raise ProtocolError("bad-message", "seed must be an integer")
            obs = self.env.reset(seed)
            self.active = True
            return {"kind": "obs", "id": mid, "slot": 0,
                    "obs": [float(v) for v in obs.vector(self.cfg.L)]}
        if kind == "step":
            if not self.active:
                raise ProtocolError("no-active-episode",
                                    "step before reset")
            action = msg.get("action")
            if not isinstance(action, list):
                raise ProtocolError("bad-action", "action must be a list")
            try:
                result = self.env.step(np.asarray(action, dtype=float))
            except ValueError as exc:
                raise ProtocolError("bad-action", str(exc)) from exc
            except RuntimeError as exc:
                self.active = False
                raise ProtocolError("episode-done", str(exc)) from exc
            if result.done:
                self.active = False
            return {"kind": "result", "id": mid,
                    "obs": [float(v) for v in result.obs.vector(self.cfg.L)],
                    "reward": float(result.reward),
                    "done": bool(result.done),
                    "info": _json_info(result.info)}
        if kind == "close":
            self.closed = True
            return {"kind": "result", "id": mid, "closed": True}
        raise ProtocolError("bad-message", f"cannot serve kind {kind!r}")


def serve_stdio(cfg: ScenarioConfig, stdin=None, stdout=None) -> None:
    """Run one session over text streams until close or EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = Session(cfg)
    for line in stdin:
        reply = session.handle_line(line)
        if reply:
            stdout.write(reply + "\n")
            stdout.flush()
        if session.closed:
            break


class _TCPHandler(socketserver.StreamRequestHandler):
    def handle(self):
        session = Session(self.server.cfg)  # type: ignore[attr-defined]
        for raw in self.rfile:
            reply = session.handle_line(raw.decode("utf-8"))
            if reply:
                self.wfile.write((reply + "\n").encode("utf-8"))
            if session.closed:
                break


class BridgeTCPServer(socketserver.ThreadingTCPServer):
    """One isolated session per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, cfg: ScenarioConfig):
        super().__init__(address, _TCPHandler)
        self.cfg = cfg


def serve(transport: str, cfg: ScenarioConfig) -> None:
    """Entry point: transport is "stdio" or "tcp:PORT"."""
    if transport == "stdio":
        serve_stdio(cfg)
    elif transport.startswith("tcp:"):
        port = int(transport.split(":", 1)[1])
        with BridgeTCPServer(("127.0.0.1", port), cfg) as server:
            server.serve_forever()
    else:
        raise ValueError(f"unknown transport {transport!r}")


# ---------------------------------------------------------------------------
# Baseline policies
# ---------------------------------------------------------------------------

def baseline_random(cfg: ScenarioConfig, rng: np.random.Generator):
    """Uniformly random in-range actions; beams are projected by the env."""
    w_scale = math.sqrt(cfg.P_dl / (2 * cfg.M * cfg.K))

    def policy(obs: StateObs) -> np.ndarray:
        return np.concatenate([
            [rng.uniform(0.0, cfg.v_max), rng.uniform(-math.pi, math.pi)],
            rng.integers(0, 2, cfg.K).astype(float),
            rng.normal(0.0, w_scale, 2 * cfg.M * cfg.K),
            rng.uniform(0.0, 2 * math.pi, cfg.F + cfg.N),
        ])

    return policy


def baseline_matched(cfg: ScenarioConfig):
    """Round-robin co-phasing beam, steering the UAV to the node centroid."""
    centroid = (np.mean([p.x for p in cfg.node_pos]),
                np.mean([p.y for p in cfg.node_pos]))

    def policy(obs: StateObs) -> np.ndarray:
        ch = unflatten_csi(obs.csi, cfg)
        focus = obs.slot_index % cfg.K
        phases, beam = matched_solution(focus, ch, cfg)
        x = obs.uav_xy[0] * cfg.area_x
        y = obs.uav_xy[1] * cfg.area_y
        dx, dy = centroid[0] - x, centroid[1] - y
        dist = math.hypot(dx, dy)
        speed = min(cfg.v_max, dist / cfg.slot_dt)
        heading = math.atan2(dy, dx) if dist > 0 else 0.0
        action = Action(speed=speed, heading=heading,
                        schedule=np.ones(cfg.K, dtype=bool),
                        W=beam.W, theta_U=phases.theta_U,
                        theta_R=phases.theta_R)
        return encode_action(action, cfg)

    return policy


POLICIES = ("random", "matched")


def make_policy(name: str, cfg: ScenarioConfig, seed: int):
    if name == "random":
        return baseline_random(cfg, np.random.default_rng(seed))
    if name == "matched":
        return baseline_matched(cfg)
    raise ValueError(f"unknown policy {name!r}; choose from {POLICIES}")


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

METRIC_FIXED_COLUMNS = ("episode", "seed", "slot", "min_rate", "reward",
                        "boundary", "power_used")


def metric_columns(K: int):
    return list(METRIC_FIXED_COLUMNS) + [f"rate_{k}" for k in range(K)]


def emit_metrics(traces, K: int) -> str:
    """One CSV row per slot; shortest-roundtrip float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(metric_columns(K))
    for episode, trace in enumerate(traces):
        for i, info in enumerate(trace.infos):
            row = [episode, trace.seed, info["slot"],
                   repr(float(info["min_rate"])),
                   repr(float(trace.rewards[i])),
                   int(info["boundary"]),
                   repr(float(info["power_used"]))]
            row += [repr(float(r)) for r in info["rates"]]
            writer.writerow(row)
    return buf.getvalue()


@dataclass
class EvalSummary:
    policy: str
    episodes: int
    mean_min_rate: float
    std_min_rate: float
    mean_reward: float

    def line(self) -> str:
        return (f"policy={self.policy} episodes={self.episodes} "
                f"min_rate_mean={self.mean_min_rate!r} "
                f"min_rate_std={self.std_min_rate!r} "
                f"reward_mean={self.mean_reward!r}")


def evaluate(cfg: ScenarioConfig, policy_name: str, episodes: int,
             seed: int) -> tuple[list[EpisodeTrace], EvalSummary]:
    """Run a named policy for E episodes with consecutive episode seeds."""
    traces = []
    for e in range(episodes):
        policy = make_policy(policy_name, cfg, seed + e)
        traces.append(run_episode(policy, cfg, seed + e))
    min_rates = np.array([t.report.min_rate for t in traces])
    rewards = np.array([np.mean(t.rewards) for t in traces])
    summary = EvalSummary(policy=policy_name, episodes=episodes,
                          mean_min_rate=float(min_rates.mean()),
                          std_min_rate=float(min_rates.std()),
                          mean_reward=float(rewards.mean()))
    return traces, summary


def sweep(cfg: ScenarioConfig, key: str, values, policy_name: str,
          episodes: int, seed: int) -> str:
    """Vary one config key; one summary CSV row per value."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value", "episodes", "mean_min_rate",
                     "std_min_rate", "mean_reward"])
    for value in values:
        sub = cfg.replace(**{key: value})
        _, summary = evaluate(sub, policy_name, episodes, seed)
        writer.writerow([key, value, episodes,
                         repr(summary.mean_min_rate),
                         repr(summary.std_min_rate),
                         repr(summary.mean_reward)])
    return buf.getvalue()
