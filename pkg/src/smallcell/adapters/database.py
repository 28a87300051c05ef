"""
Database adapter module for SQLite persistence of drop results.

Results are stored as each work unit of a sweep finishes, keyed by the digest of
the experiment configuration, so an interrupted sweep resumes where it stopped
and runs of different configurations never mix.
"""
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence, Set, Tuple

import aiosqlite
import structlog

from smallcell.core.models import ResultRow

logger = structlog.get_logger(__name__)

UnitKey = Tuple[float, int]


class DatabaseManager:
    """
    Manages the SQLite connection and schema initialization.

    This class handles the lifecycle of the database connection and ensures
    the schema is properly initialized in an idempotent manner.
    """

    def __init__(self, db_path: str = "results.sqlite"):
        """
        Initialize the DatabaseManager.

        Args:
            db_path: Path to the SQLite database file, or ":memory:"
        """
        self.db_path = db_path if db_path == ":memory:" else Path(db_path)
        self._connection: Optional[aiosqlite.Connection] = None
        logger.info("DatabaseManager initialized", db_path=str(self.db_path))

    async def initialize_db(self) -> None:
        """
        Initialize the database schema.

        Schema:
            - drop_results: one JSON-encoded ResultRow per (digest, scheme,
              lambda_u, demand, n_ap, drop_index)
            - completed_units: (digest, lambda_u_ratio, drop_index) of every
              finished work unit
        """
        conn = await self.get_connection()

        await conn.execute("""
            CREATE TABLE IF NOT EXISTS drop_results (
                config_digest TEXT NOT NULL,
                scheme TEXT NOT NULL,
                lambda_u REAL NOT NULL,
                demand_bps REAL NOT NULL,
                n_ap INTEGER NOT NULL,
                drop_index INTEGER NOT NULL,
                payload TEXT NOT NULL,
                PRIMARY KEY (config_digest, scheme, lambda_u, demand_bps, n_ap, drop_index)
            )
        """)

        await conn.execute("""
            CREATE TABLE IF NOT EXISTS completed_units (
                config_digest TEXT NOT NULL,
                lambda_u_ratio REAL NOT NULL,
                drop_index INTEGER NOT NULL,
                finished_at TEXT NOT NULL,
                PRIMARY KEY (config_digest, lambda_u_ratio, drop_index)
            )
        """)

        await conn.commit()
        logger.info("Database schema initialized", db_path=str(self.db_path))

    async def get_connection(self) -> aiosqlite.Connection:
        """
        Get or create a database connection.

        Returns:
            An aiosqlite.Connection instance.
        """
        if self._connection is None:
            if isinstance(self.db_path, Path):
                self.db_path.parent.mkdir(parents=True, exist_ok=True)
            self._connection = await aiosqlite.connect(str(self.db_path))
            logger.debug("Database connection established", db_path=str(self.db_path))
        return self._connection

    async def close(self) -> None:
        """
        Close the database connection gracefully.
        """
        if self._connection is not None:
            await self._connection.close()
            self._connection = None
            logger.info("Database connection closed", db_path=str(self.db_path))

    async def __aenter__(self):
        """Support for async context manager (with statement)."""
        await self.initialize_db()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        """Support for async context manager (with statement)."""
        await self.close()


class ResultDAO:
    """
    Data Access Object for drop results.

    All queries are parameterized.
    """

    def __init__(self, db_manager: DatabaseManager):
        """
        Initialize the ResultDAO.

        Args:
            db_manager: The DatabaseManager instance to use for database operations.
        """
        self.db_manager = db_manager

    async def save_unit(
        self, digest: str, unit: UnitKey, rows: Sequence[ResultRow]
    ) -> None:
        """
        Store the rows of one work unit and mark the unit finished, in one commit.

        Args:
            digest: Configuration digest
            unit: (lambda_u_ratio, drop_index)
            rows: Result rows produced by the unit
        """
        conn = await self.db_manager.get_connection()
        ratio, drop_index = unit
        try:
            await conn.executemany(
                """
                INSERT OR REPLACE INTO drop_results
                    (config_digest, scheme, lambda_u, demand_bps, n_ap, drop_index, payload)
                VALUES (?, ?, ?, ?, ?, ?, ?)
                """,
                [
                    (
                        digest,
                        row.scheme.value,
                        row.lambda_u,
                        row.demand_bps,
                        row.n_ap,
                        row.drop_index,
                        row.model_dump_json(),
                    )
                    for row in rows
                ],
            )
            await conn.execute(
                """
                INSERT OR REPLACE INTO completed_units
                    (config_digest, lambda_u_ratio, drop_index, finished_at)
                VALUES (?, ?, ?, ?)
                """,
                (digest, ratio, drop_index, datetime.now(timezone.utc).isoformat()),
            )
            await conn.commit()
            logger.debug("Work unit saved", digest=digest, drop_index=drop_index, rows=len(rows))
        except Exception as e:
            await conn.rollback()
            logger.error("Failed to save work unit", digest=digest, drop_index=drop_index, error=str(e))
            raise

    async def completed_units(self, digest: str) -> Set[UnitKey]:
        """
        Work units already finished for a configuration.

        Returns:
            Set of (lambda_u_ratio, drop_index)
        """
        conn = await self.db_manager.get_connection()
        cursor = await conn.execute(
            "SELECT lambda_u_ratio, drop_index FROM completed_units WHERE config_digest = ?",
            (digest,),
        )
        found = await cursor.fetchall()
        await cursor.close()
        return {(float(ratio), int(index)) for ratio, index in found}

    async def fetch_rows(self, digest: str) -> List[ResultRow]:
        """
        All rows of a configuration in the deterministic merge order.

        Returns:
            Rows sorted by (scheme, lambda_u, demand, n_ap, drop_index)
        """
        conn = await self.db_manager.get_connection()
        cursor = await conn.execute(
            "SELECT payload FROM drop_results WHERE config_digest = ?", (digest,)
        )
        found = await cursor.fetchall()
        await cursor.close()
        rows = [ResultRow.model_validate_json(payload) for (payload,) in found]
        return sorted(rows, key=ResultRow.sort_key)

    async def clear(self, digest: str) -> int:
        """
        Delete every row and unit marker of a configuration.

        Returns:
            Number of result rows deleted
        """
        conn = await self.db_manager.get_connection()
        cursor = await conn.execute(
            "DELETE FROM drop_results WHERE config_digest = ?", (digest,)
        )
        deleted = cursor.rowcount
        await cursor.close()
        await conn.execute("DELETE FROM completed_units WHERE config_digest = ?", (digest,))
        await conn.commit()
        logger.info("Results cleared", digest=digest, deleted=deleted)
        return deleted
