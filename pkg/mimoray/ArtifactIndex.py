import json
from textwrap import dedent
from contextlib import closing
import sqlite3
import logging

log = logging.getLogger(__name__)


class ArtifactNotIndexed(KeyError): pass
class ArtifactIndexCorrupt(ArtifactNotIndexed): pass


class IndexedArtifact:
    '''What the index knows about one output file'''

    def __init__(self, sha256, size, alpha=None, seed=None, stage=None, stage_key=None, metadata=None):
        self.sha256 = sha256
        self.size = size
        self.alpha = alpha
        self.seed = seed
        self.stage = stage
        self.stage_key = stage_key
        self.metadata = metadata if metadata is not None else dict()


    def __repr__(self):
        return "%s(sha256=%s, stage=%s, alpha=%r)" % (
            self.__class__.__name__, self.sha256[:12] if self.sha256 else None, self.stage, self.alpha)


    def copy(self):
        return IndexedArtifact(
            sha256 = self.sha256,
            size = self.size,
            alpha = self.alpha,
            seed = self.seed,
            stage = self.stage,
            stage_key = self.stage_key,
            metadata = dict(self.metadata),
        )


class ArtifactIndex:
    '''Tracks the files of an output directory in a sqlite3 database'''


    def __init__(self, path):
        '''
        :param path: Path of the database file
        '''
        self.__path = path
        self.__db = sqlite3.connect(self.__path, check_same_thread=False)
        self._init_db()


    @property
    def path(self):
        return self.__path


    def _init_db(self):
        with closing(self.__db.cursor()) as curs:

            curs.execute(dedent("""\
                CREATE TABLE IF NOT EXISTS artifacts (
                    name        text NOT NULL PRIMARY KEY,
                    sha256      text NOT NULL,
                    size        UNSIGNED INTEGER NOT NULL,
                    alpha       real,
                    seed        text,
                    stage       text,
                    stage_key   text,
                    metadata    text NOT NULL
                );
                """))

            try:
                curs.execute("CREATE INDEX stage_key_idx ON artifacts (stage_key)")
            except sqlite3.OperationalError as e:
                if "already exists" in str(e):
                    pass
                else:
                    raise

            self.__db.commit()


    @property
    def num_items(self):
        with closing(self.__db.cursor()) as curs:
            for row in curs.execute("SELECT count() FROM artifacts"):
                return row[0]


    def keys(self):
        '''All artifact names, sorted'''
        with closing(self.__db.cursor()) as curs:
            return [row[0] for row in curs.execute("SELECT name FROM artifacts ORDER BY name")]


    def items(self):
        '''(name, IndexedArtifact) sorted by name'''
        for name in self.keys():
            try:
                yield name, self.get(name)
            except ArtifactNotIndexed:
                pass # Removed before we could grab it


    def add(self, name, item):
        '''
        Add or replace the entry for a file

        :param name: Name of the file relative to the output directory
        :param item: IndexedArtifact
        '''
        with closing(self.__db.cursor()) as curs:

            # Encode data
            metadata = json.dumps(item.metadata, sort_keys=True)

            sql = dedent("""\
                INSERT OR REPLACE INTO artifacts
                (
                    name,
                    sha256,
                    size,
                    alpha,
                    seed,
                    stage,
                    stage_key,
                    metadata
                )
                VALUES
                (?, ?, ?, ?, ?, ?, ?, ?)
                """)
            curs.execute(sql, (
                name,
                item.sha256,
                item.size,
                item.alpha,
                None if item.seed is None else str(item.seed), # 64 bit seeds overflow sqlite integers
                item.stage,
                item.stage_key,
                metadata))

            self.__db.commit()
        log.debug("Indexed %s (%s)", name, item.sha256[:12])


    def get(self, name):
        '''
        Get the entry of a file

        :param name: Name relative to the output directory
        :return: IndexedArtifact
        :raises ArtifactNotIndexed: If name is not in the index
        '''
        with closing(self.__db.cursor()) as curs:

            sql = dedent("""\
                SELECT
                    sha256,
                    size,
                    alpha,
                    seed,
                    stage,
                    stage_key,
                    metadata
                FROM artifacts
                WHERE name = ?
                """)
            for sha256, size, alpha, seed, stage, stage_key, metadata in curs.execute(sql, (name, )):

                # Decode data
                try:
                    metadata = json.loads(metadata)
                except Exception as e:
                    self.remove(name)
                    raise ArtifactIndexCorrupt('Metadata corrupt: %s: %s' % (
                        e.__class__.__name__, str(e)))

                return IndexedArtifact(
                    sha256 = sha256,
                    size = size,
                    alpha = alpha,
                    seed = None if seed is None else int(seed),
                    stage = stage,
                    stage_key = stage_key,
                    metadata = metadata,
                )

        raise ArtifactNotIndexed(name)


    def __getitem__(self, name):
        return self.get(name)


    def remove(self, name):
        '''Remove the entry of a file'''
        with closing(self.__db.cursor()) as curs:
            curs.execute("DELETE FROM artifacts WHERE name = ?", (name,))
            if curs.rowcount != 1:
                raise ArtifactNotIndexed(name)
            self.__db.commit()


    def close(self):
        if self.__db is None:
            return
        self.__db.close()
        self.__db = None
