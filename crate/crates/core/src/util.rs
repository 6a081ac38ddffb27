use std::path::{Component, Path, PathBuf};

/// Renders `path` relative to `root` with forward slashes when it lies
/// inside `root`; otherwise returns it unchanged.
pub(crate) fn relative_location(root: &Path, path: &Path) -> String {
    let abs = if path.is_absolute() { path.to_path_buf() } else { root.join(path) };
    let abs = normalize(&abs);
    let root = normalize(root);
    match abs.strip_prefix(&root) {
        Ok(rel) => to_slash(rel),
        Err(_) => abs.to_string_lossy().into_owned(),
    }
}

/// Lexically removes `.` and `..` components.
pub(crate) fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for comp in path.components() {
        match comp {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

pub(crate) fn to_slash(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Resolves a workspace location back into a filesystem path.
pub(crate) fn resolve_location(root: &Path, location: &str) -> PathBuf {
    let p = Path::new(location);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Writes `contents` to `path`, creating parent directories first.
pub(crate) fn write_file(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)
}
