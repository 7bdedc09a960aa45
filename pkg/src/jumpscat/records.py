"""Line-delimited JSON persistence for jump and co-jump records.

Every file starts with a meta record carrying the config hash; all writers
sort keys and avoid timestamps so identical runs produce identical bytes.
"""

from __future__ import annotations

import datetime as dt
import json

import numpy as np

from .detect import JumpEvent
from .errors import DataError
from .panel import minute_str
from .score import DirectionModel, PowerLawFit
from .wavelets import ScatterEmbedding


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _floats(arr):
    return [float(v) for v in np.asarray(arr).ravel()]


def embedding_to_dict(emb):
    return {
        "J": emb.J,
        "first_real": _floats(emb.first_order.real),
        "first_imag": _floats(emb.first_order.imag),
        "second_real": _floats(emb.second_order.real),
        "second_imag": _floats(emb.second_order.imag),
        "sigma1": _floats(emb.sigma1),
        "sigma2": _floats(emb.sigma2),
    }


def embedding_from_dict(data):
    first = np.array(data["first_real"]) + 1j * np.array(data["first_imag"])
    second = np.array(data["second_real"]) + 1j * np.array(data["second_imag"])
    return ScatterEmbedding(J=data["J"], first_order=first, second_order=second,
                            sigma1=np.array(data["sigma1"]),
                            sigma2=np.array(data["sigma2"]))


def powerlaw_to_dict(fit):
    if fit is None:
        return None
    return {"n_pre": fit.n_pre, "n_post": fit.n_post, "p_pre": fit.p_pre,
            "p_post": fit.p_post, "t_c": fit.t_c, "d": fit.d,
            "rel_residual": fit.rel_residual, "accepted": fit.accepted,
            "converged": fit.converged}


def powerlaw_from_dict(data):
    if data is None:
        return None
    return PowerLawFit(**data)


def event_to_record(event):
    return {
        "record": "jump",
        "ticker": event.ticker,
        "date": event.day.isoformat(),
        "time": minute_str(event.minute_of_day),
        "sign": int(event.sign),
        "score": event.score,
        "window": _floats(event.window),
        "news_related": event.news_related,
        "d1": event.d1, "d2": event.d2, "d3": event.d3,
        "a_jump": event.a_jump,
        "powerlaw": powerlaw_to_dict(event.powerlaw),
        "d1_bin": event.d1_bin, "d2_bin": event.d2_bin, "d3_bin": event.d3_bin,
        "class": event.class_label,
        "grid_mr": list(event.grid_mr) if event.grid_mr else None,
        "grid_tr": list(event.grid_tr) if event.grid_tr else None,
        "cojump_id": event.cojump_id,
        "embedding": embedding_to_dict(event.embedding) if event.embedding else None,
        "planted": event.planted,
    }


def record_to_event(data):
    if data.get("record") != "jump":
        raise DataError(f"not a jump record: {data.get('record')!r}")
    event = JumpEvent(
        ticker=data["ticker"],
        day=dt.date.fromisoformat(data["date"]),
        minute_of_day=int(data["time"][:2]) * 60 + int(data["time"][3:5]),
        sign=int(data["sign"]),
        window=np.array(data["window"], dtype=float),
    )
    event.news_related = data.get("news_related")
    event.d1, event.d2, event.d3 = data.get("d1"), data.get("d2"), data.get("d3")
    event.a_jump = data.get("a_jump")
    event.powerlaw = powerlaw_from_dict(data.get("powerlaw"))
    event.d1_bin, event.d2_bin = data.get("d1_bin"), data.get("d2_bin")
    event.d3_bin = data.get("d3_bin")
    event.class_label = data.get("class")
    event.grid_mr = tuple(data["grid_mr"]) if data.get("grid_mr") else None
    event.grid_tr = tuple(data["grid_tr"]) if data.get("grid_tr") else None
    event.cojump_id = data.get("cojump_id")
    if data.get("embedding"):
        event.embedding = embedding_from_dict(data["embedding"])
    event.planted = data.get("planted")
    return event


def cojump_to_record(cj):
    return {
        "record": "cojump",
        "cojump_id": cj.cojump_id,
        "date": cj.day.isoformat(),
        "time": minute_str(cj.minute_of_day),
        "size": cj.size,
        "members": [e.ticker for e in cj.members],
        "mean_d1": cj.mean_d1, "min_d1": cj.min_d1, "max_d1": cj.max_d1,
        "sigma_size": cj.sigma_size,
        "mean_norm": cj.mean_norm, "min_norm": cj.min_norm,
        "quadrant": cj.quadrant,
        "sign_mean": cj.sign_mean,
        "rho": cj.rho,
        "news_related": cj.news_related,
        "degenerate_sigma": cj.degenerate_sigma,
    }


def model_to_dict(model, bank_meta=None):
    return {
        "weights": _floats(model.weights),
        "mean": _floats(model.mean),
        "scale": _floats(model.scale),
        "orientation": model.orientation,
        "explained_variance": model.explained_variance,
        "block": model.block,
        "n_fit": model.n_fit,
        "bank": bank_meta,
    }


def model_from_dict(data):
    return DirectionModel(weights=np.array(data["weights"]),
                          mean=np.array(data["mean"]),
                          scale=np.array(data["scale"]),
                          orientation=int(data["orientation"]),
                          explained_variance=float(data["explained_variance"]),
                          block=data.get("block", "imag_second"),
                          n_fit=int(data.get("n_fit", 0)))


def write_jsonl(path, records, config_hash, stage, extra_meta=None):
    meta = {"record": "meta", "stage": stage, "config_hash": config_hash}
    if extra_meta:
        meta.update(extra_meta)
    with open(path, "w") as fh:
        fh.write(_dumps(meta) + "\n")
        for rec in records:
            fh.write(_dumps(rec) + "\n")


def read_jsonl(path):
    """Returns (meta dict or None, list of record dicts)."""
    meta, records = None, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            if data.get("record") == "meta":
                meta = data
            else:
                records.append(data)
    return meta, records


def read_events(path):
    meta, records = read_jsonl(path)
    return meta, [record_to_event(r) for r in records]


def write_json(path, payload, config_hash):
    payload = dict(payload)
    payload["config_hash"] = config_hash
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_table(path, header, rows, config_hash):
    """CSV with a leading comment line carrying the config hash."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash: {config_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def file_config_hash(path):
    """Config hash recorded in an artifact, or None if unreadable."""
    try:
        with open(path) as fh:
            first = fh.readline()
    except OSError:
        return None
    first = first.strip()
    if first.startswith("# config_hash:"):
        return first.split(":", 1)[1].strip()
    if first.startswith("<?xml"):
        try:
            with open(path) as fh:
                head = fh.read(500)
        except OSError:
            return None
        marker = "config_hash: "
        if marker in head:
            return head.split(marker, 1)[1].split()[0].rstrip("->").strip()
        return None
    try:
        data = json.loads(first)
    except json.JSONDecodeError:
        try:
            data = read_json(path)
        except (OSError, json.JSONDecodeError):
            return None
    if isinstance(data, dict):
        return data.get("config_hash")
    return None
