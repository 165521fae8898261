"""Diagnostic tool to check the run ledger connection and its recorded runs."""
import sys

from sqlalchemy import inspect

from database.db import EpochRecord, TrainingRun, get_db, get_sessionmaker, resolve_url


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    out_dir = argv[0] if argv else "runs/latest"
    url = resolve_url(out_dir)

    print("=" * 70)
    print("RUN LEDGER DIAGNOSTIC")
    print("=" * 70)

    print("\n[1] Database URL Check")
    print(f"URL: {url.split('@')[-1]}")
    if url.startswith("sqlite"):
        print("⚠️  Using SQLite (one ledger file per run directory)")
        print("   Set DATABASE_URL to share one ledger across runs")
    elif url.startswith("postgresql"):
        print("✅ Using PostgreSQL (shared ledger)")
    else:
        print("❌ Unknown database type")

    print("\n[2] Connection Test")
    try:
        engine = get_sessionmaker(url).kw["bind"]
        with engine.connect():
            pass
        print("✅ Successfully connected to database")
    except Exception as e:
        print(f"❌ Failed to connect to database: {e}")
        return 1

    print("\n[3] Table Check")
    tables = set(inspect(engine).get_table_names())
    missing = {TrainingRun.__tablename__, EpochRecord.__tablename__} - tables
    if missing:
        print(f"❌ Missing tables: {', '.join(sorted(missing))}")
        return 1
    print(f"✅ Tables present: {TrainingRun.__tablename__}, {EpochRecord.__tablename__}")

    print("\n[4] Data Check")
    db = get_db(url)
    try:
        runs = db.query(TrainingRun).order_by(TrainingRun.id).all()
        if runs:
            print(f"✅ Found {len(runs)} run(s):")
            for run in runs:
                print(f"   - #{run.id} {run.name} ({run.variant}, seed {run.seed})")
                print(f"     Status: {run.status}, epochs recorded: {len(run.epochs)}")
        else:
            print("⚠️  No runs found in the ledger")
            print("   This is normal before the first `micronet.py train`")
    except Exception as e:
        print(f"❌ Failed to query database: {e}")
        return 1
    finally:
        db.close()

    print("\n" + "=" * 70)
    return 0


if __name__ == "__main__":
    sys.exit(main())
