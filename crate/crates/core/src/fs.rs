//! Storage seam between the vault and the bytes it persists.
//!
//! Every read and write the vault and key store perform goes through
//! [`FsAdapter`]. [`DiskFs`] talks to the host filesystem; [`MemFs`] keeps a
//! flat map of paths in memory and is used to check that vault behaviour does
//! not depend on the backing store.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Component, Path, PathBuf};
use std::sync::RwLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileStat {
    pub len: u64,
    pub is_dir: bool,
}

pub trait FsAdapter: Send + Sync {
    fn read_file(&self, path: &Path) -> io::Result<Vec<u8>>;

    /// Replaces `path` with `data` so that concurrent readers observe either
    /// the old contents or the new ones, never a mix.
    fn write_file_atomic(&self, path: &Path, data: &[u8]) -> io::Result<()>;

    /// Entries directly under `dir`, sorted.
    fn list_dir(&self, dir: &Path) -> io::Result<Vec<PathBuf>>;

    fn stat(&self, path: &Path) -> io::Result<FileStat>;

    fn remove(&self, path: &Path) -> io::Result<()>;

    fn create_dir_all(&self, dir: &Path) -> io::Result<()>;

    /// Absolute, normalized form of `path`, used for root separation checks.
    fn resolve(&self, path: &Path) -> io::Result<PathBuf>;

    fn exists(&self, path: &Path) -> bool {
        self.stat(path).is_ok()
    }
}

/// Host filesystem. Atomic writes go through a temp file in the target
/// directory, fsync, then rename.
#[derive(Debug, Default, Clone, Copy)]
pub struct DiskFs;

impl FsAdapter for DiskFs {
    fn read_file(&self, path: &Path) -> io::Result<Vec<u8>> {
        fs::read(path)
    }

    fn write_file_atomic(&self, path: &Path, data: &[u8]) -> io::Result<()> {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::Builder::new()
            .prefix(".tmp-")
            .tempfile_in(dir)?;
        tmp.write_all(data)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        if let Ok(d) = fs::File::open(dir) {
            // Directory fsync is unsupported on some platforms.
            let _ = d.sync_all();
        }
        Ok(())
    }

    fn list_dir(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        let mut out = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<io::Result<Vec<_>>>()?;
        out.sort();
        Ok(out)
    }

    fn stat(&self, path: &Path) -> io::Result<FileStat> {
        let md = fs::metadata(path)?;
        Ok(FileStat {
            len: md.len(),
            is_dir: md.is_dir(),
        })
    }

    fn remove(&self, path: &Path) -> io::Result<()> {
        fs::remove_file(path)
    }

    fn create_dir_all(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)
    }

    fn resolve(&self, path: &Path) -> io::Result<PathBuf> {
        fs::canonicalize(path)
    }
}

/// In-memory filesystem. Paths are normalized lexically and relative paths
/// are taken relative to `/`.
#[derive(Debug, Default)]
pub struct MemFs {
    inner: RwLock<MemState>,
}

#[derive(Debug, Default)]
struct MemState {
    files: BTreeMap<PathBuf, Vec<u8>>,
    dirs: BTreeSet<PathBuf>,
}

impl MemFs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every file currently stored, for leak scans in tests.
    pub fn snapshot(&self) -> Vec<(PathBuf, Vec<u8>)> {
        let state = self.inner.read().unwrap();
        state
            .files
            .iter()
            .map(|(p, d)| (p.clone(), d.clone()))
            .collect()
    }
}

fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::from("/");
    for c in path.components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::Normal(s) => out.push(s),
            Component::RootDir | Component::CurDir | Component::Prefix(_) => {}
        }
    }
    out
}

fn not_found(path: &Path) -> io::Error {
    io::Error::new(
        io::ErrorKind::NotFound,
        format!("{}: no such file", path.display()),
    )
}

impl MemState {
    fn is_dir(&self, p: &Path) -> bool {
        p == Path::new("/") || self.dirs.contains(p)
    }
}

impl FsAdapter for MemFs {
    fn read_file(&self, path: &Path) -> io::Result<Vec<u8>> {
        let p = normalize(path);
        let state = self.inner.read().unwrap();
        state.files.get(&p).cloned().ok_or_else(|| not_found(path))
    }

    fn write_file_atomic(&self, path: &Path, data: &[u8]) -> io::Result<()> {
        let p = normalize(path);
        let mut state = self.inner.write().unwrap();
        let parent = p.parent().unwrap_or(Path::new("/"));
        if !state.is_dir(parent) {
            return Err(not_found(parent));
        }
        if state.dirs.contains(&p) {
            return Err(io::Error::new(
                io::ErrorKind::IsADirectory,
                format!("{} is a directory", path.display()),
            ));
        }
        state.files.insert(p, data.to_vec());
        Ok(())
    }

    fn list_dir(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        let d = normalize(dir);
        let state = self.inner.read().unwrap();
        if !state.is_dir(&d) {
            return Err(not_found(dir));
        }
        let children = state
            .files
            .keys()
            .chain(state.dirs.iter())
            .filter(|p| p.parent() == Some(d.as_path()))
            .cloned()
            .collect::<BTreeSet<_>>();
        Ok(children.into_iter().collect())
    }

    fn stat(&self, path: &Path) -> io::Result<FileStat> {
        let p = normalize(path);
        let state = self.inner.read().unwrap();
        if let Some(data) = state.files.get(&p) {
            Ok(FileStat {
                len: data.len() as u64,
                is_dir: false,
            })
        } else if state.is_dir(&p) {
            Ok(FileStat {
                len: 0,
                is_dir: true,
            })
        } else {
            Err(not_found(path))
        }
    }

    fn remove(&self, path: &Path) -> io::Result<()> {
        let p = normalize(path);
        let mut state = self.inner.write().unwrap();
        state.files.remove(&p).map(|_| ()).ok_or_else(|| not_found(path))
    }

    fn create_dir_all(&self, dir: &Path) -> io::Result<()> {
        let d = normalize(dir);
        let mut state = self.inner.write().unwrap();
        for ancestor in d.ancestors() {
            if state.files.contains_key(ancestor) {
                return Err(io::Error::new(
                    io::ErrorKind::AlreadyExists,
                    format!("{} is a file", ancestor.display()),
                ));
            }
        }
        for ancestor in d.ancestors() {
            if ancestor != Path::new("/") {
                state.dirs.insert(ancestor.to_path_buf());
            }
        }
        Ok(())
    }

    fn resolve(&self, path: &Path) -> io::Result<PathBuf> {
        let p = normalize(path);
        if self.inner.read().unwrap().is_dir(&p) || self.exists(&p) {
            Ok(p)
        } else {
            Err(not_found(path))
        }
    }
}

/// True when `a` and `b` share no subtree: neither equals nor contains the
/// other. Both paths must already be resolved.
pub fn disjoint(a: &Path, b: &Path) -> bool {
    !a.starts_with(b) && !b.starts_with(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exercise(fs: &dyn FsAdapter, root: &Path) {
        let dir = root.join("a/b");
        fs.create_dir_all(&dir).unwrap();
        let f = dir.join("x.bin");
        assert!(!fs.exists(&f));
        fs.write_file_atomic(&f, b"one").unwrap();
        fs.write_file_atomic(&f, b"second").unwrap();
        assert_eq!(fs.read_file(&f).unwrap(), b"second");
        assert_eq!(fs.stat(&f).unwrap().len, 6);
        assert!(fs.stat(&dir).unwrap().is_dir);
        fs.write_file_atomic(&dir.join("a.bin"), b"").unwrap();
        let names: Vec<_> = fs
            .list_dir(&dir)
            .unwrap()
            .into_iter()
            .map(|p| p.file_name().unwrap().to_owned())
            .collect();
        assert_eq!(names, ["a.bin", "x.bin"]);
        fs.remove(&f).unwrap();
        assert_eq!(
            fs.read_file(&f).unwrap_err().kind(),
            io::ErrorKind::NotFound
        );
        assert_eq!(fs.remove(&f).unwrap_err().kind(), io::ErrorKind::NotFound);
        assert!(fs
            .write_file_atomic(&root.join("missing/y"), b"z")
            .is_err());
    }

    #[test]
    fn disk_adapter_basics() {
        let tmp = tempfile::tempdir().unwrap();
        exercise(&DiskFs, tmp.path());
    }

    #[test]
    fn mem_adapter_basics() {
        exercise(&MemFs::new(), Path::new("/vault"));
    }

    #[test]
    fn mem_normalizes_paths() {
        let fs = MemFs::new();
        fs.create_dir_all(Path::new("/r/k")).unwrap();
        assert_eq!(
            fs.resolve(Path::new("/r/./x/../k")).unwrap(),
            PathBuf::from("/r/k")
        );
    }

    #[test]
    fn disjoint_roots() {
        assert!(disjoint(Path::new("/a/data"), Path::new("/a/keys")));
        assert!(!disjoint(Path::new("/a/data"), Path::new("/a/data/keys")));
        assert!(!disjoint(Path::new("/a"), Path::new("/a")));
        assert!(!disjoint(Path::new("/a/data/keys"), Path::new("/a/data")));
        assert!(disjoint(Path::new("/a/data"), Path::new("/a/data2")));
    }
}
