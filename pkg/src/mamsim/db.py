from sqlmodel import SQLModel, Field, create_engine, Session, select
from typing import Iterable, Optional
from datetime import datetime, timezone
import pathlib, os
from sqlalchemy import text
from sqlalchemy.exc import OperationalError

from mamsim.metrics import RunRecord


class RunRow(SQLModel, table=True):
    id: Optional[int] = Field(default=None, primary_key=True)
    created: datetime
    method: str       # "col" | "rma-lock" | "rma-lockall"
    strategy: str     # "blocking" | "threading" | "nonblocking" | "wait-drains"
    ns: int
    nd: int
    n_elements: int
    seed: str         # unsigned 64-bit, stored as text
    t_redis: float
    t_it_normal: float
    t_it_during: float
    n_it_overlapped: int
    t_it_nd: float
    omega: float
    data_ok: bool = True
    trace_hash: str = ""


def get_engine(db_path: str):
    """Return a SQLAlchemy engine for SQLite and ensure its directory exists.

    - Expands ~ and environment variables in db_path.
    - Creates parent directory if missing.
    - Raises a clear error if the directory cannot be created or opened.
    """
    db_path = os.path.expandvars(os.path.expanduser(str(db_path)))
    p = pathlib.Path(db_path)
    try:
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
    except PermissionError as e:
        raise RuntimeError(
            f"Cannot create results directory '{p.parent}'. Set output.db to a writable location "
            f"or pre-create the directory. Original error: {e}"
        )
    except Exception as e:
        if not p.parent.exists():
            raise RuntimeError(f"Failed to prepare results directory '{p.parent}': {e}")

    eng = create_engine(f"sqlite:///{p}")
    try:
        with eng.connect() as _:
            pass
    except OperationalError as e:
        raise RuntimeError(
            f"Unable to open SQLite database file at '{p}'. Ensure the directory is writable. Original error: {e}"
        )
    return eng


def init_db(engine):
    """Create tables if they do not exist and switch the file to WAL."""
    SQLModel.metadata.create_all(engine)
    try:
        with Session(engine) as s:
            s.exec(text("PRAGMA journal_mode=WAL;"))
            s.exec(text("PRAGMA synchronous=NORMAL;"))
            s.commit()
    except Exception:
        pass


def to_row(record: RunRecord, created: datetime | None = None) -> RunRow:
    return RunRow(
        created=created or datetime.now(timezone.utc),
        method=record.method.value,
        strategy=record.strategy.value,
        ns=record.ns,
        nd=record.nd,
        n_elements=record.n_elements,
        seed=str(record.seed),
        t_redis=record.t_redis,
        t_it_normal=record.t_it_normal,
        t_it_during=record.t_it_during,
        n_it_overlapped=record.n_it_overlapped,
        t_it_nd=record.t_it_nd,
        omega=record.omega,
        data_ok=record.data_ok,
        trace_hash=record.trace_hash,
    )


def store_records(engine, records: Iterable[RunRecord]) -> int:
    count = 0
    with Session(engine) as db:
        for record in records:
            db.add(to_row(record))
            count += 1
        db.commit()
    return count


def load_rows(engine, method: str | None = None) -> list[RunRow]:
    with Session(engine) as db:
        q = select(RunRow)
        if method:
            q = q.where(RunRow.method == method)
        return list(db.exec(q.order_by(RunRow.id)).all())
