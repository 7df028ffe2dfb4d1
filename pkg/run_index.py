import json
import os
import sqlite3
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

DB_NAME = "runs.db"

COLUMNS = [
    "run_id", "experiment", "created_at", "code_version", "reduced",
    "out_path", "parameters_json", "summary_json",
]


def _db_path(out_root: str) -> str:
    return os.path.join(out_root, DB_NAME)


def _connect(out_root: str) -> sqlite3.Connection:
    os.makedirs(out_root, exist_ok=True)
    conn = sqlite3.connect(_db_path(out_root))
    ensure_schema(conn)
    return conn


def column_exists(cur, table, column):
    cur.execute(f"PRAGMA table_info({table})")
    return any(row[1] == column for row in cur.fetchall())


def ensure_schema(conn: sqlite3.Connection) -> None:
    """Creates the runs table and adds any column an older db is missing."""
    cur = conn.cursor()
    cur.execute("""
        CREATE TABLE IF NOT EXISTS runs (
          run_id INTEGER PRIMARY KEY AUTOINCREMENT,
          experiment TEXT NOT NULL,
          created_at TEXT NOT NULL,
          out_path TEXT NOT NULL
        )
    """)

    additions = {
        "code_version": "TEXT",
        "reduced": "INTEGER",
        "parameters_json": "TEXT",
        "summary_json": "TEXT",
    }
    for col, coltype in additions.items():
        if not column_exists(cur, "runs", col):
            cur.execute(f"ALTER TABLE runs ADD COLUMN {col} {coltype}")
    conn.commit()


def insert_run(out_root: str, experiment: str, out_path: str, meta: Dict[str, Any]) -> int:
    """
    Records one written result. meta is the metadata.json payload.
    Returns runs.run_id
    """
    provenance = meta.get("provenance", {})
    conn = _connect(out_root)
    try:
        cur = conn.cursor()
        cur.execute("""
            INSERT INTO runs
            (experiment, created_at, code_version, reduced, out_path, parameters_json, summary_json)
            VALUES (?, ?, ?, ?, ?, ?, ?)
        """, (
            experiment,
            provenance.get("created_at") or datetime.now(timezone.utc).isoformat(),
            provenance.get("code_version", ""),
            int(bool(provenance.get("reduced", False))),
            out_path,
            json.dumps(provenance.get("parameters", {})),
            json.dumps(meta.get("summary", {})),
        ))
        conn.commit()
        return cur.lastrowid
    finally:
        conn.close()


def _row_dict(row) -> Dict[str, Any]:
    out = dict(zip(COLUMNS, row))
    out["reduced"] = bool(out["reduced"])
    out["parameters"] = json.loads(out.pop("parameters_json") or "{}")
    out["summary"] = json.loads(out.pop("summary_json") or "{}")
    return out


def list_runs(out_root: str, limit: int = 25, experiment: Optional[str] = None) -> List[Dict[str, Any]]:
    """
    Returns list of dict rows: newest first.
    """
    if not os.path.isfile(_db_path(out_root)):
        return []
    conn = _connect(out_root)
    try:
        sql = f"SELECT {', '.join(COLUMNS)} FROM runs"
        args: list = []
        if experiment:
            sql += " WHERE experiment = ?"
            args.append(experiment)
        sql += " ORDER BY run_id DESC LIMIT ?"
        args.append(limit)
        rows = conn.cursor().execute(sql, args).fetchall()
    finally:
        conn.close()
    return [_row_dict(r) for r in rows]


def get_run_by_id(out_root: str, run_id: int) -> Optional[Dict[str, Any]]:
    if not os.path.isfile(_db_path(out_root)):
        return None
    conn = _connect(out_root)
    try:
        row = conn.cursor().execute(
            f"SELECT {', '.join(COLUMNS)} FROM runs WHERE run_id = ?", (run_id,)
        ).fetchone()
    finally:
        conn.close()
    return _row_dict(row) if row else None
