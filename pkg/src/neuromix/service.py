"""Live-tuning sessions: run a circuit, nudge parameters, watch it respond.

A thin HTTP + WebSocket layer for interactive exploration.  Every physical
number it emits comes from :mod:`neuromix.sim`, :mod:`neuromix.ivcurve`, or
:mod:`neuromix.network`; the service only schedules integration chunks,
relays parameter edits, and downsamples traces for display.

Endpoints
---------
- ``POST /sessions`` creates a session from a preset and starts its worker.
- ``GET /sessions`` and ``GET /sessions/{id}`` describe live sessions.
- ``PATCH /sessions/{id}/params`` applies one batch of parameter edits
  and can pause or resume the run (``"running": true/false``).  The batch
  is all-or-nothing: any unknown path or out-of-bounds value rejects the
  whole batch and every old value is kept.  The response is sent only
  after the batch is in force, so the first integration step computed
  after a successful PATCH already uses the new values.
- ``GET /sessions/{id}/iv`` returns the fast, slow, and ultraslow I-V
  curves for one node plus the regime label for that node in isolation at
  its baseline current.
- ``WS /sessions/{id}/stream`` streams trace frames and event markers.
- ``GET /schema`` publishes the message schemas, parameter bounds, and
  presets (protocol version included).
- ``DELETE /sessions/{id}`` stops the worker and discards the session.

Wire format (version 1)
-----------------------
Each WebSocket text message is one netstring: the payload byte length in
ASCII decimal, ``:``, the JSON document, ``,``.  Frames carry per-node
``(t, v)`` series downsampled to at most ``MAX_FRAME_POINTS`` samples by
min/max pairs per bucket, so extremes (spike peaks included) survive any
downsampling.  Frames are produced at most ``MAX_FPS`` per wall second.
Every subscriber receives the same frame texts in the same order; a
subscriber that falls behind loses its oldest queued messages and can
detect the loss from the ``seq`` gap.  The simulation never waits for a
subscriber.

Parameter edits are applied between integration steps, never inside one,
and the state vector is not touched: the trace continues through a gain
change.  Editable paths follow the live-update table of the kernel
(``node{i}.{label}.alpha``, ``node{i}.{label}.delta``, ``node{i}.i_base``,
``syn{k}.weight``, ``gap{k}.g``); bounds are in :data:`PARAM_BOUNDS`.

Run it with ``neuromix serve`` (uvicorn) or mount :data:`app` directly.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import math
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict, Field

from . import __version__, ivcurve, kernels, sim
from . import network as nw
from .core import TIMESCALES, mixed_feedback_spec

__all__ = [
    "app", "Session", "PROTOCOL_VERSION", "PARAM_BOUNDS", "PRESETS",
    "MAX_FPS", "MAX_FRAME_POINTS", "pack", "unpack", "decimate_minmax",
]

PROTOCOL_VERSION = 1
MAX_FPS = 60.0
MAX_FRAME_POINTS = 240
QUEUE_SLOTS = 64            # per-subscriber backlog before frames drop
HIST_SAMPLES = 512          # rolling raw window for spike-marker detection

PRESETS = ("single-neuron", "hco", "stg")

# Documented slider ranges, keyed by the path's final component.  The UI
# mirrors these; the service rejects anything outside them.
PARAM_BOUNDS = {
    "alpha": (0.0, 6.0),
    "delta": (-4.0, 4.0),
    "i_base": (-5.0, 5.0),
    "weight": (-6.0, 0.0),
    "g": (0.0, 1.0),
}

# live-table index -> bounds key (matches sim._resolve_path)
_TABLE_FIELD = {0: "alpha", 1: "delta", 2: "weight", 3: "i_base", 4: "g"}


# -- wire framing ---------------------------------------------------------

def pack(doc: dict) -> str:
    """One netstring carrying one JSON document."""
    payload = json.dumps(doc, separators=(",", ":"), allow_nan=False)
    return f"{len(payload.encode())}:{payload},"


def unpack(text: str) -> list[dict]:
    """Parse a concatenation of netstrings back into documents."""
    docs = []
    raw = text.encode()
    pos = 0
    while pos < len(raw):
        colon = raw.index(b":", pos)
        length = int(raw[pos:colon])
        body = raw[colon + 1:colon + 1 + length]
        if raw[colon + 1 + length:colon + 2 + length] != b",":
            raise ValueError("netstring missing terminator")
        docs.append(json.loads(body.decode()))
        pos = colon + 2 + length
    return docs


def decimate_minmax(t, v, max_points: int = MAX_FRAME_POINTS):
    """Downsample keeping each bucket's min and max in time order.

    Every input sample lands in exactly one bucket and each bucket
    contributes its extremes, so the global min and max always survive.
    Short inputs pass through untouched.
    """
    t = np.asarray(t)
    v = np.asarray(v)
    n = t.shape[0]
    if n <= max_points:
        return t, v
    edges = np.linspace(0, n, max_points // 2 + 1).astype(int)
    keep = {0, n - 1}
    for b in range(len(edges) - 1):
        lo, hi = edges[b], edges[b + 1]
        if hi <= lo:
            continue
        keep.add(lo + int(np.argmin(v[lo:hi])))
        keep.add(lo + int(np.argmax(v[lo:hi])))
    idx = np.array(sorted(keep))
    return t[idx], v[idx]


# -- session --------------------------------------------------------------

class _Subscriber:
    __slots__ = ("queue", "dropped")

    def __init__(self):
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_SLOTS)
        self.dropped = 0


class SessionError(Exception):
    def __init__(self, detail: dict):
        super().__init__(detail.get("error", "session error"))
        self.detail = detail


class Session:
    """One running circuit: kernel state, parameter tables, subscribers.

    The worker integrates one chunk per loop iteration and sleeps
    ``1/MAX_FPS`` between chunks, which caps the frame rate and leaves the
    event loop free to serve requests between chunks.  Parameter batches
    queue up and are applied at the next chunk boundary; the queue is
    drained even while paused so a PATCH never stalls.
    """

    def __init__(self, sid: str, preset: str, net: nw.NetworkSpec,
                 speed: float, dt: float | None, record_dt: float | None,
                 min_span: float, running: bool):
        asm = nw.assemble_network(net)
        self.id = sid
        self.preset = preset
        self.net = net
        self.specs = asm.specs              # session-private copies
        self.names = list(net.names)
        self.desc = asm.desc
        self.dt = dt if dt is not None else sim.default_dt(asm.specs,
                                                           net.synapses)
        self.stride = (max(1, int(round(record_dt / self.dt)))
                       if record_dt else 1)
        self.record_dt = self.stride * self.dt
        self.speed = speed
        self.min_span = min_span
        self.running = running
        self.closed = False

        self.y = asm.initial_state()
        self.step = 0                       # integration steps completed
        self.seq = 0                        # frames emitted
        self.params_rev = 0

        # chunk span tracks speed: one frame covers speed/MAX_FPS time units
        per_frame = max(1.0, speed / MAX_FPS) / self.dt
        self.chunk_steps = max(self.stride,
                               int(round(per_frame / self.stride)) * self.stride)

        self._seg = sim.build_protocol(self.desc, ())
        self._subs: dict[int, _Subscriber] = {}
        self._sub_ids = itertools.count()
        self._updates: asyncio.Queue = asyncio.Queue()
        self._task: asyncio.Task | None = None

        # spike-marker bookkeeping: detection reruns over a rolling raw
        # window so an excursion straddling chunk boundaries completes,
        # with thresholds from the session-lifetime voltage range (the
        # detector's own 60/40 rule needs the full swing, which one chunk
        # rarely shows)
        self._hist = [(np.zeros(0), np.zeros(0)) for _ in self.names]
        self._vrange = [(math.inf, -math.inf) for _ in self.names]
        self._last_spike = [-math.inf] * len(self.names)

        # element row -> the spec object whose mirror must follow the table
        self._el_by_idx = {idx: key
                           for key, idx in self.desc["_el_lookup"].items()}

    @property
    def t(self) -> float:
        return self.step * self.dt

    # -- parameters -------------------------------------------------------

    def param_rows(self) -> list[dict]:
        d = self.desc
        rows = []
        for (node, label), idx in sorted(d["_el_lookup"].items()):
            for field_name, table in (("alpha", "el_alpha"),
                                      ("delta", "el_delta")):
                lo, hi = PARAM_BOUNDS[field_name]
                rows.append({"path": f"node{node}.{label}.{field_name}",
                             "value": float(d[table][idx]),
                             "min": lo, "max": hi})
        for i in range(d["n_nodes"]):
            lo, hi = PARAM_BOUNDS["i_base"]
            rows.append({"path": f"node{i}.i_base",
                         "value": float(d["i_base"][i]), "min": lo, "max": hi})
        for k in range(len(d["syn_w"])):
            lo, hi = PARAM_BOUNDS["weight"]
            rows.append({"path": f"syn{k}.weight",
                         "value": float(d["syn_w"][k]), "min": lo, "max": hi})
        for k in range(len(d["gap_g"])):
            lo, hi = PARAM_BOUNDS["g"]
            rows.append({"path": f"gap{k}.g",
                         "value": float(d["gap_g"][k]), "min": lo, "max": hi})
        return sorted(rows, key=lambda r: r["path"])

    def stage(self, updates: dict) -> list[tuple[int, int, str, float]]:
        """Validate one batch without touching anything.

        All paths must resolve and all values must sit inside the
        documented bounds, otherwise the whole batch is refused.
        """
        staged = []
        for path, value in updates.items():
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise SessionError({"error": "bad-value", "path": path,
                                    "value": value}) from None
            try:
                table, idx = sim._resolve_path(self.desc, path)
            except ValueError as e:
                raise SessionError({
                    "error": "unknown-path", "path": path, "message": str(e),
                    "paths": [r["path"] for r in self.param_rows()],
                }) from None
            lo, hi = PARAM_BOUNDS[_TABLE_FIELD[table]]
            if not (lo <= value <= hi) or not math.isfinite(value):
                old = float(self._table(table)[idx])
                raise SessionError({
                    "error": "out-of-bounds", "path": path, "value": value,
                    "bounds": [lo, hi], "kept": old,
                })
            staged.append((table, idx, path, value))
        return staged

    def _table(self, table: int) -> np.ndarray:
        return self.desc[("el_alpha", "el_delta", "syn_w",
                          "i_base", "gap_g")[table]]

    def _apply(self, staged) -> dict:
        applied = {}
        for table, idx, path, value in staged:
            self._table(table)[idx] = value
            if table in (0, 1):
                node, label = self._el_by_idx[idx]
                for el in self.specs[node].elements:
                    if el.label == label:
                        setattr(el, _TABLE_FIELD[table], value)
            applied[path] = value
        self.params_rev += 1
        return applied

    async def submit(self, updates: dict, running: bool | None = None) -> dict:
        """Queue one validated batch and wait until it is in force."""
        if not updates and running is None:
            raise SessionError({"error": "empty-updates"})
        staged = self.stage(updates)
        box: dict = {"staged": staged, "running": running,
                     "event": asyncio.Event()}
        await self._updates.put(box)
        try:
            await asyncio.wait_for(box["event"].wait(), timeout=10.0)
        except asyncio.TimeoutError:
            raise SessionError({"error": "apply-timeout"}) from None
        if "error" in box:
            raise SessionError({"error": box["error"]})
        return box["result"]

    def _drain_updates(self):
        while not self._updates.empty():
            box = self._updates.get_nowait()
            applied = self._apply(box["staged"]) if box["staged"] else {}
            if box.get("running") is not None:
                self.running = box["running"]
            box["result"] = {"applied": applied, "t": self.t,
                             "step": self.step, "running": self.running,
                             "params_rev": self.params_rev}
            if applied:
                self._broadcast(pack({"v": PROTOCOL_VERSION, "type": "event",
                                      "kind": "params", "t": self.t,
                                      "updates": applied,
                                      "params_rev": self.params_rev}))
            box["event"].set()

    # -- integration ------------------------------------------------------

    def _advance(self) -> str | None:
        t0 = self.step * self.dt
        t, y, y_end = kernels.net_run(self.desc, self._seg, self.y, t0,
                                      self.dt, self.chunk_steps, self.stride)
        if not np.isfinite(y_end).all() or not np.isfinite(y).all():
            self.running = False
            return pack({"v": PROTOCOL_VERSION, "type": "event",
                         "kind": "diverged", "t": t0})
        self.y = y_end
        self.step += self.chunk_steps
        rows_t, rows_y = t[1:], y[1:]       # row 0 repeats the previous end

        series = {}
        events = []
        off = self.desc["node_off"]
        for i, name in enumerate(self.names):
            tv = rows_y[:, off[i]]
            events.extend(self._node_events(i, name, rows_t, tv))
            dt_, dv = decimate_minmax(rows_t, tv)
            series[name] = {"t": dt_.tolist(), "v": dv.tolist()}

        self.seq += 1
        return pack({"v": PROTOCOL_VERSION, "type": "frame", "seq": self.seq,
                     "t0": float(rows_t[0]), "t1": float(rows_t[-1]),
                     "series": series, "events": events,
                     "params_rev": self.params_rev})

    def _node_events(self, i: int, name: str, t, v) -> list[dict]:
        hist_t, hist_v = self._hist[i]
        tt = np.concatenate([hist_t, t])[-HIST_SAMPLES:]
        vv = np.concatenate([hist_v, v])[-HIST_SAMPLES:]
        self._hist[i] = (tt, vv)
        lo = min(self._vrange[i][0], float(v.min()))
        hi = max(self._vrange[i][1], float(v.max()))
        self._vrange[i] = (lo, hi)
        if hi - lo < self.min_span:
            return []
        out = []
        for s in sim.detect_spikes(tt, vv,
                                   theta_hi=lo + 0.6 * (hi - lo),
                                   theta_lo=lo + 0.4 * (hi - lo),
                                   min_span=self.min_span):
            # re-detection over the rolling window repeats old peaks
            if s > self._last_spike[i] + 0.5 * self.record_dt:
                out.append({"kind": "spike", "node": name, "t": float(s)})
                self._last_spike[i] = float(s)
        return out

    # -- fan-out ----------------------------------------------------------

    def subscribe(self) -> _Subscriber:
        sub = _Subscriber()
        self._subs[next(self._sub_ids)] = sub
        return sub

    def unsubscribe(self, sub: _Subscriber):
        self._subs = {k: s for k, s in self._subs.items() if s is not sub}

    def _broadcast(self, text: str | None):
        for sub in self._subs.values():
            try:
                sub.queue.put_nowait(text)
            except asyncio.QueueFull:
                # shed the oldest message; the stream stays live and the
                # subscriber sees the gap in seq numbers
                try:
                    sub.queue.get_nowait()
                    sub.dropped += 1
                except asyncio.QueueEmpty:
                    pass
                sub.queue.put_nowait(text)

    # -- documents ---------------------------------------------------------

    def hello_doc(self) -> dict:
        return {"v": PROTOCOL_VERSION, "type": "hello", "session": self.id,
                "t": self.t, "seq": self.seq, "nodes": self.names,
                "dt": self.dt, "record_dt": self.record_dt,
                "max_fps": MAX_FPS, "max_points": MAX_FRAME_POINTS,
                "params_rev": self.params_rev, "running": self.running}

    def info(self) -> dict:
        return {"v": PROTOCOL_VERSION, "id": self.id, "preset": self.preset,
                "t": self.t, "step": self.step, "dt": self.dt,
                "record_dt": self.record_dt, "speed": self.speed,
                "running": self.running, "nodes": self.names,
                "params": self.param_rows(), "params_rev": self.params_rev}

    def iv_doc(self, node: int) -> dict:
        spec = self.specs[node]
        i_app = float(self.desc["i_base"][node])
        pred = ivcurve.predict_regime(spec, i_app)
        curves = {}
        for tag in TIMESCALES:
            cv = ivcurve.iv_curve(spec, tag)
            curves[tag] = {"v": cv.v.tolist(), "i": cv.i.tolist()}
        return {"v": PROTOCOL_VERSION, "session": self.id,
                "node": self.names[node], "t": self.t, "i_app": i_app,
                "regime": pred.regime, "v_rest": pred.v_rest,
                "curves": curves}

    # -- lifecycle ---------------------------------------------------------

    async def run(self):
        pace = 1.0 / MAX_FPS
        try:
            while not self.closed:
                self._drain_updates()
                if self.running:
                    try:
                        msg = self._advance()
                    except Exception as e:   # a worker must never die mute
                        self.running = False
                        msg = pack({"v": PROTOCOL_VERSION, "type": "event",
                                    "kind": "error", "t": self.t,
                                    "message": f"{type(e).__name__}: {e}"})
                    if msg:
                        self._broadcast(msg)
                await asyncio.sleep(pace)
        except asyncio.CancelledError:
            pass
        finally:
            self._flush_pending("closed")

    def _flush_pending(self, error: str):
        while not self._updates.empty():
            box = self._updates.get_nowait()
            box["error"] = error
            box["event"].set()

    def close(self):
        if self.closed:
            return
        self.closed = True
        self._broadcast(pack({"v": PROTOCOL_VERSION, "type": "bye",
                              "session": self.id, "t": self.t}))
        self._broadcast(None)               # sentinel: stream over
        if self._task is not None:
            self._task.cancel()
        self._flush_pending("closed")


# -- presets ----------------------------------------------------------------

def _preset_net(preset: str, overrides: dict, i_app: float | None
                ) -> nw.NetworkSpec:
    if preset not in PRESETS:
        raise SessionError({"error": "unknown-preset", "preset": preset,
                            "presets": list(PRESETS)})
    try:
        if preset == "single-neuron":
            spec = mixed_feedback_spec(**overrides)
            ia = -0.95 if i_app is None else i_app
            # kick matches the single-cell simulator's default rest nudge
            return nw.NetworkSpec(
                nodes=(nw.NetworkNode("n0", spec, ia, 0.05),))
        if preset == "hco":
            spec = mixed_feedback_spec(**overrides)
            ia = -0.95 if i_app is None else i_app
            return nw.build_half_center(spec, weight=-0.3, delta_syn=-0.5,
                                        i_base=ia)
        if overrides:
            raise SessionError({"error": "bad-overrides",
                                "message": "the stg preset is fixed; "
                                           "tune it live instead"})
        ia = -0.95 if i_app is None else i_app
        return nw.build_stg(mixed_feedback_spec(alpha_ultra_pos=2.4),
                            mixed_feedback_spec(alpha_ultra_pos=1.6),
                            mixed_feedback_spec(alpha_slow_neg=0.98),
                            gap_g=0.05, weight=-0.3, delta_syn=-0.5,
                            i_base=ia)
    except TypeError as e:
        raise SessionError({"error": "bad-overrides",
                            "message": str(e)}) from None


# -- HTTP layer --------------------------------------------------------------

class CreateSession(BaseModel):
    model_config = ConfigDict(extra="forbid")
    preset: str = "single-neuron"
    overrides: dict[str, float] = Field(default_factory=dict)
    i_app: float | None = None
    speed: float = Field(default=1000.0, gt=0)
    dt: float | None = Field(default=None, gt=0)
    record_dt: float | None = Field(default=None, gt=0)
    min_span: float = Field(default=sim.DEFAULT_MIN_SPAN, gt=0)
    running: bool = True


class PatchParams(BaseModel):
    model_config = ConfigDict(extra="forbid")
    updates: dict[str, float] = Field(default_factory=dict)
    running: bool | None = None


_sessions: dict[str, Session] = {}
_session_ids = itertools.count(1)


@asynccontextmanager
async def _lifespan(app: FastAPI):
    yield
    for s in list(_sessions.values()):
        s.close()
    _sessions.clear()


app = FastAPI(title="neuromix session service", version=__version__,
              lifespan=_lifespan)
# the browser panel is served from wherever; the API carries no
# credentials, so blanket CORS is safe and saves a reverse proxy
app.add_middleware(CORSMiddleware, allow_origins=["*"],
                   allow_methods=["*"], allow_headers=["*"])


def _get_session(sid: str) -> Session:
    s = _sessions.get(sid)
    if s is None or s.closed:
        raise HTTPException(404, {"error": "unknown-session", "id": sid})
    return s


@app.post("/sessions", status_code=201)
async def create_session(body: CreateSession):
    try:
        net = _preset_net(body.preset, body.overrides, body.i_app)
    except SessionError as e:
        raise HTTPException(422, e.detail) from None
    sid = f"s{next(_session_ids):04d}"
    s = Session(sid, body.preset, net, body.speed, body.dt, body.record_dt,
                body.min_span, body.running)
    _sessions[sid] = s
    s._task = asyncio.create_task(s.run())
    return s.info()


@app.get("/sessions")
async def list_sessions():
    return [{"id": s.id, "preset": s.preset, "t": s.t, "running": s.running}
            for s in _sessions.values() if not s.closed]


@app.get("/sessions/{sid}")
async def session_info(sid: str):
    return _get_session(sid).info()


@app.patch("/sessions/{sid}/params")
async def patch_params(sid: str, body: PatchParams):
    s = _get_session(sid)
    try:
        return await s.submit(body.updates, body.running)
    except SessionError as e:
        raise HTTPException(422, e.detail) from None


@app.get("/sessions/{sid}/iv")
async def session_iv(sid: str, node: str = "0"):
    s = _get_session(sid)
    if node in s.names:
        i = s.names.index(node)
    else:
        try:
            i = int(node)
        except ValueError:
            raise HTTPException(
                422, {"error": "unknown-node", "node": node,
                      "nodes": s.names}) from None
        if not 0 <= i < len(s.names):
            raise HTTPException(422, {"error": "unknown-node", "node": node,
                                      "nodes": s.names})
    return s.iv_doc(i)


@app.delete("/sessions/{sid}")
async def delete_session(sid: str):
    s = _get_session(sid)
    s.close()
    del _sessions[sid]
    return {"closed": sid}


@app.websocket("/sessions/{sid}/stream")
async def stream(ws: WebSocket, sid: str):
    s = _sessions.get(sid)
    if s is None or s.closed:
        await ws.close(code=4404)
        return
    await ws.accept()
    sub = s.subscribe()
    await ws.send_text(pack(s.hello_doc()))
    recv = asyncio.ensure_future(ws.receive_text())
    get = asyncio.ensure_future(sub.queue.get())
    try:
        while True:
            done, _ = await asyncio.wait({recv, get},
                                         return_when=asyncio.FIRST_COMPLETED)
            if get in done:
                text = get.result()
                if text is None:            # session closed
                    break
                await ws.send_text(text)
                get = asyncio.ensure_future(sub.queue.get())
            if recv in done:
                try:
                    incoming = recv.result()
                except WebSocketDisconnect:
                    break
                for doc in unpack(incoming):
                    if doc.get("type") == "ping":
                        await ws.send_text(pack(
                            {"v": PROTOCOL_VERSION, "type": "pong",
                             "t": s.t, "echo": doc.get("echo")}))
                recv = asyncio.ensure_future(ws.receive_text())
    except WebSocketDisconnect:
        pass
    finally:
        recv.cancel()
        get.cancel()
        s.unsubscribe(sub)
        try:
            await ws.close()
        except RuntimeError:
            pass


# -- published schemas --------------------------------------------------------

_SERIES = {"type": "object",
           "description": "per node: decimated sample arrays",
           "additionalProperties": {
               "type": "object",
               "properties": {"t": {"type": "array", "items": {"type": "number"}},
                              "v": {"type": "array", "items": {"type": "number"}}},
               "required": ["t", "v"]}}

MESSAGE_SCHEMAS = {
    "version": PROTOCOL_VERSION,
    "framing": "netstring: '<payload byte length>:<json payload>,' per "
               "WebSocket text message",
    "server": {
        "hello": {"type": "object", "required": ["v", "type", "session",
                                                 "nodes", "dt"],
                  "properties": {"v": {"const": PROTOCOL_VERSION},
                                 "type": {"const": "hello"},
                                 "session": {"type": "string"},
                                 "t": {"type": "number"},
                                 "seq": {"type": "integer"},
                                 "nodes": {"type": "array",
                                           "items": {"type": "string"}},
                                 "dt": {"type": "number"},
                                 "record_dt": {"type": "number"},
                                 "max_fps": {"type": "number"},
                                 "max_points": {"type": "integer"},
                                 "params_rev": {"type": "integer"},
                                 "running": {"type": "boolean"}}},
        "frame": {"type": "object", "required": ["v", "type", "seq", "t0",
                                                 "t1", "series", "events"],
                  "properties": {"v": {"const": PROTOCOL_VERSION},
                                 "type": {"const": "frame"},
                                 "seq": {"type": "integer"},
                                 "t0": {"type": "number"},
                                 "t1": {"type": "number"},
                                 "series": _SERIES,
                                 "events": {"type": "array", "items": {
                                     "type": "object",
                                     "properties": {
                                         "kind": {"const": "spike"},
                                         "node": {"type": "string"},
                                         "t": {"type": "number"}}}},
                                 "params_rev": {"type": "integer"}}},
        "event": {"type": "object", "required": ["v", "type", "kind", "t"],
                  "properties": {"v": {"const": PROTOCOL_VERSION},
                                 "type": {"const": "event"},
                                 "kind": {"enum": ["params", "diverged"]},
                                 "t": {"type": "number"},
                                 "updates": {"type": "object"},
                                 "params_rev": {"type": "integer"}}},
        "pong": {"type": "object",
                 "properties": {"type": {"const": "pong"},
                                "t": {"type": "number"}, "echo": {}}},
        "bye": {"type": "object",
                "properties": {"type": {"const": "bye"},
                               "session": {"type": "string"},
                               "t": {"type": "number"}}},
    },
    "client": {
        "ping": {"type": "object",
                 "properties": {"type": {"const": "ping"}, "echo": {}}},
    },
}


@app.get("/schema")
async def schema():
    return {"v": PROTOCOL_VERSION, "service": __version__,
            "presets": list(PRESETS), "bounds": PARAM_BOUNDS,
            "messages": MESSAGE_SCHEMAS,
            "endpoints": {
                "create": "POST /sessions",
                "info": "GET /sessions/{id}",
                "params": "PATCH /sessions/{id}/params",
                "iv": "GET /sessions/{id}/iv?node=<name or index>",
                "stream": "WS /sessions/{id}/stream",
                "delete": "DELETE /sessions/{id}",
            }}
