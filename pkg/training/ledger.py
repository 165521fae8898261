"""Run ledger: training runs and their per-epoch metrics in a SQL database."""
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

from sqlalchemy.exc import SQLAlchemyError

from core.errors import ConfigError
from core.log import get_logger
from database.db import EpochRecord, TrainingRun, get_db, resolve_url

logger = get_logger("LEDGER")


class RunLedger:
    """Persistent record of training runs.

    Auxiliary to the CSV logs and checkpoints: a database failure is logged
    and swallowed, never allowed to stop a training run.
    """

    def __init__(self, out_dir=None, url: Optional[str] = None):
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
        self.url = url or resolve_url(out_dir)
        logger.debug(f"Ledger at {self.url.split('@')[-1]}")

    def _open(self, what: str):
        """A session, or None (logged) when the database cannot be opened."""
        try:
            return get_db(self.url)
        except SQLAlchemyError as e:
            logger.warning(f"Could not {what}: ledger unavailable ({e})")
            return None

    def _read_session(self):
        try:
            return get_db(self.url)
        except SQLAlchemyError as e:
            raise ConfigError(f"cannot open run ledger {self.url.split('@')[-1]}: {e}") from e

    def start_run(self, name: str, variant: str, seed: int, resolved_config: Dict) -> Optional[int]:
        """Create a run row and return its id."""
        db = self._open("record run start")
        if db is None:
            return None
        try:
            run = TrainingRun(name=name, variant=variant, seed=str(seed),
                              resolved_config=json.dumps(resolved_config, sort_keys=True))
            db.add(run)
            db.commit()
            logger.info(f"Started run #{run.id} ({name}, {variant}, seed {seed})")
            return run.id
        except SQLAlchemyError as e:
            logger.warning(f"Could not record run start: {e}")
            db.rollback()
            return None
        finally:
            db.close()

    def record_epoch(self, run_id: Optional[int], epoch: int, loss: float, miou: Optional[float],
                     acc: Optional[float], seconds: float) -> None:
        if run_id is None:
            return
        db = self._open(f"record epoch {epoch} of run #{run_id}")
        if db is None:
            return
        try:
            db.add(EpochRecord(run_id=run_id, epoch=epoch, loss=loss, miou=miou, acc=acc, seconds=seconds))
            db.commit()
        except SQLAlchemyError as e:
            logger.warning(f"Could not record epoch {epoch} of run #{run_id}: {e}")
            db.rollback()
        finally:
            db.close()

    def finish_run(self, run_id: Optional[int], status: str, loss: Optional[float] = None,
                   miou: Optional[float] = None, acc: Optional[float] = None) -> None:
        if run_id is None:
            return
        db = self._open(f"finish run #{run_id}")
        if db is None:
            return
        try:
            run = db.get(TrainingRun, run_id)
            if run is None:
                logger.warning(f"Run #{run_id} not found")
                return
            run.status = status
            run.finished_at = datetime.now(timezone.utc)
            run.final_loss, run.final_miou, run.final_acc = loss, miou, acc
            db.commit()
            logger.info(f"Run #{run_id} {status}")
        except SQLAlchemyError as e:
            logger.warning(f"Could not finish run #{run_id}: {e}")
            db.rollback()
        finally:
            db.close()

    def list_runs(self) -> List[Dict]:
        """All runs, oldest first, with their epoch counts."""
        db = self._read_session()
        try:
            runs = db.query(TrainingRun).order_by(TrainingRun.id).all()
            return [
                {
                    "id": run.id,
                    "name": run.name,
                    "variant": run.variant,
                    "seed": run.seed,
                    "status": run.status,
                    "epochs": len(run.epochs),
                    "final_loss": run.final_loss,
                    "final_miou": run.final_miou,
                    "final_acc": run.final_acc,
                    "started_at": run.started_at.isoformat() if run.started_at else None,
                }
                for run in runs
            ]
        finally:
            db.close()

    def get_epochs(self, run_id: int) -> List[Dict]:
        db = self._read_session()
        try:
            rows = (db.query(EpochRecord).filter(EpochRecord.run_id == run_id)
                    .order_by(EpochRecord.epoch).all())
            return [{"epoch": r.epoch, "loss": r.loss, "miou": r.miou, "acc": r.acc,
                     "seconds": r.seconds} for r in rows]
        finally:
            db.close()
