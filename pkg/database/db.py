"""Database setup and models for the run ledger."""
from datetime import datetime, timezone

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

import config
from core.log import get_logger

logger = get_logger("DATABASE")

Base = declarative_base()


def _now():
    return datetime.now(timezone.utc)


class TrainingRun(Base):
    """One invocation of `micronet.py train`."""
    __tablename__ = 'training_runs'

    id = Column(Integer, primary_key=True, autoincrement=True)
    name = Column(String, nullable=False)
    variant = Column(String, nullable=False)
    seed = Column(String, nullable=False)  # u64 does not fit a signed BIGINT
    resolved_config = Column(Text, nullable=False)
    status = Column(String, nullable=False, default="running")
    started_at = Column(DateTime(timezone=True), nullable=False, default=_now)
    finished_at = Column(DateTime(timezone=True))
    final_loss = Column(Float)
    final_miou = Column(Float)
    final_acc = Column(Float)

    epochs = relationship("EpochRecord", back_populates="run", order_by="EpochRecord.epoch",
                          cascade="all, delete-orphan")


class EpochRecord(Base):
    """Validation metrics of one epoch of a run."""
    __tablename__ = 'epoch_records'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey('training_runs.id'), nullable=False, index=True)
    epoch = Column(Integer, nullable=False)
    loss = Column(Float, nullable=False)
    miou = Column(Float)
    acc = Column(Float)
    seconds = Column(Float, nullable=False)

    run = relationship("TrainingRun", back_populates="epochs")


def resolve_url(out_dir=None) -> str:
    """DATABASE_URL when set, else a SQLite file next to the run outputs."""
    if config.DATABASE_URL:
        return config.DATABASE_URL
    if out_dir is None:
        return "sqlite://"
    return f"sqlite:///{out_dir}/{config.LEDGER_FILENAME}"


_sessions = {}


def get_sessionmaker(url: str):
    """One engine per URL, created on first use."""
    if url not in _sessions:
        logger.debug(f"Connecting to: {url.split('@')[-1]}")  # Hide credentials
        engine = create_engine(url)
        Base.metadata.create_all(bind=engine)
        _sessions[url] = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    return _sessions[url]


def get_db(url: str):
    """Get database session. Caller closes it."""
    return get_sessionmaker(url)()
