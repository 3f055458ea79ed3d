use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Bounded producer side. Cloning adds a producer; the stream ends when every
/// producer is gone.
pub struct StreamTx<T> {
    tx: SyncSender<Result<T>>,
    cancel: Arc<AtomicBool>,
}

impl<T> Clone for StreamTx<T> {
    fn clone(&self) -> Self {
        StreamTx {
            tx: self.tx.clone(),
            cancel: self.cancel.clone(),
        }
    }
}

/// Consumer side. Dropping it raises the cancellation flag, so abandoned
/// producers stop within a bounded number of pushes.
pub struct StreamRx<T> {
    rx: Receiver<Result<T>>,
    cancel: Arc<AtomicBool>,
}

/// Bounded in-memory stream with end-of-stream on producer exhaustion,
/// error propagation in-band, and cancellation from the consumer side.
pub fn stream<T>(bound: usize) -> (StreamTx<T>, StreamRx<T>) {
    let (tx, rx) = sync_channel(bound.max(1));
    let cancel = Arc::new(AtomicBool::new(false));
    (
        StreamTx {
            tx,
            cancel: cancel.clone(),
        },
        StreamRx { rx, cancel },
    )
}

impl<T> StreamTx<T> {
    /// Blocking push with backpressure. Returns false when the consumer is
    /// gone or cancelled; the producer should wind down.
    pub fn send(&self, v: T) -> bool {
        if self.cancel.load(Ordering::Relaxed) {
            return false;
        }
        self.tx.send(Ok(v)).is_ok()
    }

    /// Non-blocking variant used where a producer must not wedge on a full
    /// buffer while holding a lock.
    pub fn try_send(&self, v: T) -> std::result::Result<(), TrySendError<Result<T>>> {
        self.tx.try_send(Ok(v))
    }

    pub fn send_err(&self, e: Error) -> bool {
        self.tx.send(Err(e)).is_ok()
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::Relaxed)
    }
}

impl<T> StreamRx<T> {
    pub fn cancel(&self) {
        self.cancel.store(true, Ordering::Relaxed);
    }
}

impl<T> Drop for StreamRx<T> {
    fn drop(&mut self) {
        self.cancel.store(true, Ordering::Relaxed);
    }
}

impl<T> Iterator for StreamRx<T> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Result<T>> {
        self.rx.recv().ok()
    }
}
