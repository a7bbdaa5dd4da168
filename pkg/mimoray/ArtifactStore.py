import os
import hashlib
import logging
from contextlib import AbstractContextManager

from .ArtifactIndex import ArtifactIndex, IndexedArtifact, ArtifactNotIndexed

log = logging.getLogger(__name__)


MANIFEST_NAME = 'manifest.txt'
INDEX_NAME = 'index.db'

HASH_CHUNK = 1 << 20


class ArtifactInUse(ValueError): pass


def file_sha256(path):
    '''Hex sha256 of a file's content'''
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(HASH_CHUNK), b''):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactHandle(AbstractContextManager):
    '''
    Holds a reference to one output file of an ArtifactStore

    Handle is intended to be used in a with context.  The file is checked out
    until the handle is released; on release a new or changed file is hashed
    and recorded in the store's index together with the alpha, seed and
    stage key set on the handle.
    '''

    def __init__(self, store, name, entry):
        '''
        :param store: Reference back to ArtifactStore
        :param name: Name of the file relative to the store directory
        :param entry: IndexedArtifact or None if the name is not indexed
        '''
        self.__store = store
        self.__name = name
        self.__in_cache = entry is not None and os.path.isfile(self.path)
        self.__discarded = False
        self.__written = False
        entry = entry.copy() if entry is not None else IndexedArtifact(sha256=None, size=0)
        self.alpha = entry.alpha
        self.seed = entry.seed
        self.stage = entry.stage
        self.stage_key = entry.stage_key
        self.metadata = entry.metadata
        self.__init_state = self._state()


    def __str__(self):
        return self.name


    def __repr__(self):
        return "%s('%s', '%s')" % (
            self.__class__.__name__,
            self.__store.path,
            self.__name)


    @property
    def store(self):
        '''Store this handle belongs to'''
        return self.__store


    @property
    def name(self):
        return self.__name


    @property
    def path(self):
        '''Path to the file on disk'''
        return os.path.normpath(os.path.join(self.__store.path, self.__name))


    @property
    def in_cache(self):
        '''File existed and was indexed when the handle was taken'''
        return self.__in_cache


    def _state(self):
        return (self.alpha, self.seed, self.stage, self.stage_key, dict(self.metadata))


    @property
    def written(self):
        '''File was opened for writing through this handle'''
        return self.__written


    @property
    def metadata_changed(self):
        return self._state() != self.__init_state


    def open(self, mode):
        '''
        Open the file

        :param mode: Mode to open in
        '''
        if any(c in mode for c in "wax+"):
            self.__written = True
        self._mk_path_dir()
        return open(self.path, mode=mode)


    def _mk_path_dir(self):
        parent = os.path.dirname(self.path)
        if not os.path.exists(parent):
            os.makedirs(parent)


    def discard(self):
        '''Mark file to be removed from the store'''
        self.__discarded = True


    @property
    def discarded(self):
        return self.__discarded


    # File is checked out before the handle is created, so no __enter__


    def __exit__(self, exc_type, exc_value, traceback):
        if exc_type is not None:
            # Partially written output is not kept
            self.discard()
        self.release()


    def release(self):
        '''
        Tell the store we're done with the file

        This hashes a written file and updates the index.
        '''
        self.__store.release_handle(handle=self)


class ArtifactStore:
    '''
    Output directory with a content index

    Files live under the store directory, tracked by a sqlite3 database
    (ArtifactIndex) holding each file's sha256, alpha, seed and the key of
    the stage configuration that produced it.
    '''

    def __init__(self, path):
        '''
        :param path: Directory to keep outputs in (created if missing)
        '''
        if os.path.exists(path) and not os.path.isdir(path):
            raise ValueError("Path is not a directory: " + path)
        if not os.path.exists(path):
            os.makedirs(path)

        self.__path = path
        self.__index = ArtifactIndex(path=os.path.join(path, INDEX_NAME))
        self.__open_states = dict()


    @property
    def path(self):
        return self.__path


    @property
    def index(self):
        '''Direct access to the index'''
        return self.__index


    def get(self, name):
        '''
        Check out a file

        :param name: Name relative to the store.  Can have slashes.
        :return: ArtifactHandle
        :raises ArtifactInUse: If the file is already checked out
        '''
        name = os.path.normpath(name)

        if name in self.__open_states:
            raise ArtifactInUse("Artifact already checked out: %s" % (name))

        try:
            entry = self.__index[name]
        except ArtifactNotIndexed:
            entry = None

        handle = ArtifactHandle(store = self, name = name, entry = entry)

        if os.path.exists(handle.path) and not os.path.isfile(handle.path):
            raise ValueError("Artifact name '%s' already exists as directory" % (name))

        if os.path.exists(handle.path):
            self.__open_states[name] = {
                'exists': True,
                'size': os.path.getsize(handle.path),
                'mtime': os.path.getmtime(handle.path),
            }
        else:
            self.__open_states[name] = {
                'exists': False,
            }

        return handle


    def release_handle(self, handle):
        '''
        A handle has been released

        Re-index the file if it was written or its attributes changed.

        :param handle: ArtifactHandle that was released
        '''
        open_state = self.__open_states.pop(handle.name)

        if handle.discarded:
            try:
                self.__index.remove(handle.name)
            except ArtifactNotIndexed:
                pass
            if os.path.exists(handle.path):
                os.unlink(handle.path)

        elif os.path.exists(handle.path):
            size = os.path.getsize(handle.path)
            mtime = os.path.getmtime(handle.path)
            changed = not open_state['exists'] or open_state['size'] != size or open_state['mtime'] != mtime
            if changed or handle.written or handle.metadata_changed or not handle.in_cache:
                self.__index.add(handle.name, IndexedArtifact(
                    sha256 = file_sha256(handle.path),
                    size = size,
                    alpha = handle.alpha,
                    seed = handle.seed,
                    stage = handle.stage,
                    stage_key = handle.stage_key,
                    metadata = handle.metadata))
                log.info("Wrote %s", handle.path)


    def is_current(self, name, stage_key):
        '''
        True if name was produced with stage_key and is unchanged on disk

        :param name: Name relative to the store
        :param stage_key: Key of the stage configuration
        '''
        name = os.path.normpath(name)
        try:
            entry = self.__index[name]
        except ArtifactNotIndexed:
            return False
        path = os.path.join(self.__path, name)
        if entry.stage_key != stage_key or not os.path.isfile(path):
            return False
        return file_sha256(path) == entry.sha256


    def verify(self):
        '''
        Names whose file is missing or no longer matches its indexed hash

        :return: list of names
        '''
        bad = list()
        for name, entry in self.__index.items():
            path = os.path.join(self.__path, name)
            if not os.path.isfile(path) or file_sha256(path) != entry.sha256:
                bad.append(name)
        return bad


    def prune(self, keep):
        '''
        Remove every indexed file not named in keep

        Empty directories left behind are removed too.

        :param keep: Names relative to the store
        :return: sorted list of removed names
        '''
        keep = set(os.path.normpath(name) for name in keep)
        removed = list()
        for name in self.__index.keys():
            if name in keep:
                continue
            if name in self.__open_states:
                raise ArtifactInUse("Can't prune checked out artifact: %s" % (name))
            self.__index.remove(name)
            path = os.path.join(self.__path, name)
            if os.path.isfile(path):
                os.unlink(path)
            parent = os.path.dirname(name)
            while parent and os.path.isdir(os.path.join(self.__path, parent)) \
                    and not os.listdir(os.path.join(self.__path, parent)):
                os.rmdir(os.path.join(self.__path, parent))
                parent = os.path.dirname(parent)
            removed.append(name)
        return removed


    def write_manifest(self):
        '''
        Write manifest.txt listing every indexed file

        One "path alpha seed sha256" line per file, sorted by path.  Holds
        nothing that changes between identical runs.

        :return: Path of the manifest
        '''
        path = os.path.join(self.__path, MANIFEST_NAME)
        with open(path, 'wt') as fh:
            fh.write("# path alpha seed sha256\n")
            for name, entry in self.__index.items():
                fh.write("%s %s %s %s\n" % (
                    name.replace(os.sep, '/'),
                    '-' if entry.alpha is None else repr(entry.alpha),
                    '-' if entry.seed is None else entry.seed,
                    entry.sha256))
        log.info("Wrote manifest %s (%d files)", path, self.__index.num_items)
        return path


    def close(self):
        self.__index.close()


def read_manifest(path):
    '''
    :return: list of (path, alpha or None, seed or None, sha256)
    '''
    entries = list()
    with open(path, 'rt') as fh:
        for line in fh:
            if line.startswith('#') or not line.strip():
                continue
            name, alpha, seed, sha256 = line.split()
            entries.append((
                name,
                None if alpha == '-' else float(alpha),
                None if seed == '-' else int(seed),
                sha256))
    return entries
