//! Thread-local fault injection at flush boundaries.
//!
//! The writer announces every durability point (fsync site) through
//! [`fire`]. A registered hook may return an error, which the writer
//! propagates as an I/O failure *before* the sync executes while all
//! preceding writes remain issued — exactly the on-disk state a process
//! kill at that boundary would leave behind. Crash-recovery test harnesses
//! install a hook, drive a workload to a chosen boundary, then run recovery
//! against the resulting file state.
//!
//! Hooks are thread-local: writers are synchronous on the calling thread,
//! so concurrently running tests cannot interfere with one another.

use std::cell::RefCell;
use std::rc::Rc;

/// What is being made durable at a flush site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlushKind {
    /// Staged data blocks flushed to the artifact file.
    DataBlocks,
    /// Manifest block flushed to the artifact file.
    ManifestBlock,
    /// WAL begin record.
    WalBegin,
    /// WAL manifest record.
    WalManifest,
    /// WAL commit record — the atomic commit point.
    WalCommit,
    /// WAL abort record.
    WalAbort,
    /// Header patch flushed to the artifact file.
    HeaderPatch,
}

/// A durability point about to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlushPoint {
    pub kind: FlushKind,
    /// Manifest version being committed, when applicable (0 otherwise).
    pub manifest_version: u64,
}

type Hook = Rc<dyn Fn(FlushPoint) -> std::io::Result<()>>;

thread_local! {
    static HOOK: RefCell<Option<Hook>> = const { RefCell::new(None) };
}

/// Install a flush hook on the current thread, replacing any previous one.
pub fn set_hook<F>(hook: F)
where
    F: Fn(FlushPoint) -> std::io::Result<()> + 'static,
{
    HOOK.with(|h| *h.borrow_mut() = Some(Rc::new(hook)));
}

/// Remove the current thread's flush hook.
pub fn clear_hook() {
    HOOK.with(|h| *h.borrow_mut() = None);
}

/// Called by the writer immediately before each fsync.
pub(crate) fn fire(point: FlushPoint) -> std::io::Result<()> {
    let hook = HOOK.with(|h| h.borrow().clone());
    match hook {
        Some(f) => f(point),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hook_fires_and_clears() {
        let count = Rc::new(RefCell::new(0));
        let c = count.clone();
        set_hook(move |_| {
            *c.borrow_mut() += 1;
            Ok(())
        });
        fire(FlushPoint { kind: FlushKind::WalCommit, manifest_version: 1 }).unwrap();
        clear_hook();
        fire(FlushPoint { kind: FlushKind::WalCommit, manifest_version: 2 }).unwrap();
        assert_eq!(*count.borrow(), 1);
    }

    #[test]
    fn hook_error_propagates() {
        set_hook(|p| {
            if p.kind == FlushKind::HeaderPatch {
                Err(std::io::Error::other("injected crash"))
            } else {
                Ok(())
            }
        });
        assert!(fire(FlushPoint { kind: FlushKind::WalBegin, manifest_version: 0 }).is_ok());
        assert!(fire(FlushPoint { kind: FlushKind::HeaderPatch, manifest_version: 0 }).is_err());
        clear_hook();
    }
}
