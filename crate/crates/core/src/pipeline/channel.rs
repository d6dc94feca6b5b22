//! Bounded FIFO channel with explicit close and cancel-aware blocking.
//!
//! Producers block while the queue is full, consumers while it is empty.
//! The stream ends for consumers once every producer is closed or dropped
//! and the buffered items are drained.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use crossbeam_channel::{Receiver, RecvTimeoutError, SendTimeoutError, Sender};

use crate::error::{Error, Result};

const POLL: Duration = Duration::from_millis(20);

pub struct Producer<T> {
    tx: Option<Sender<T>>,
}

pub struct Consumer<T> {
    rx: Receiver<T>,
}

pub fn bounded_channel<T>(capacity: usize) -> Result<(Producer<T>, Consumer<T>)> {
    if capacity == 0 {
        return Err(Error::InvalidArgument("channel capacity must be >= 1".into()));
    }
    let (tx, rx) = crossbeam_channel::bounded(capacity);
    Ok((Producer { tx: Some(tx) }, Consumer { rx }))
}

impl<T> Clone for Producer<T> {
    fn clone(&self) -> Self {
        Self { tx: self.tx.clone() }
    }
}

impl<T> Clone for Consumer<T> {
    fn clone(&self) -> Self {
        Self { rx: self.rx.clone() }
    }
}

impl<T> Producer<T> {
    /// Blocking send; errors after [`Producer::close`] or once all consumers are gone.
    pub fn send(&self, item: T) -> Result<()> {
        let tx = self.tx.as_ref().ok_or(Error::ChannelClosed)?;
        tx.send(item).map_err(|_| Error::ChannelClosed)
    }

    /// Blocking send that gives up when `cancel` is raised. `Ok(false)` means cancelled.
    pub fn send_cancellable(&self, mut item: T, cancel: &AtomicBool) -> Result<bool> {
        let tx = self.tx.as_ref().ok_or(Error::ChannelClosed)?;
        loop {
            if cancel.load(Ordering::Relaxed) {
                return Ok(false);
            }
            match tx.send_timeout(item, POLL) {
                Ok(()) => return Ok(true),
                Err(SendTimeoutError::Timeout(back)) => item = back,
                Err(SendTimeoutError::Disconnected(_)) => return Err(Error::ChannelClosed),
            }
        }
    }

    pub fn try_send(&self, item: T) -> Result<std::result::Result<(), T>> {
        let tx = self.tx.as_ref().ok_or(Error::ChannelClosed)?;
        match tx.try_send(item) {
            Ok(()) => Ok(Ok(())),
            Err(crossbeam_channel::TrySendError::Full(back)) => Ok(Err(back)),
            Err(crossbeam_channel::TrySendError::Disconnected(_)) => Err(Error::ChannelClosed),
        }
    }

    /// Close this producer handle. Consumers see end-of-stream after the last
    /// handle closes and the queue drains.
    pub fn close(&mut self) {
        self.tx = None;
    }

    pub fn is_closed(&self) -> bool {
        self.tx.is_none()
    }
}

impl<T> Consumer<T> {
    /// Next item, or `None` at end-of-stream.
    pub fn recv(&self) -> Option<T> {
        self.rx.recv().ok()
    }

    /// Like [`Consumer::recv`] but also returns `None` once `cancel` is raised.
    pub fn recv_cancellable(&self, cancel: &AtomicBool) -> Option<T> {
        loop {
            if cancel.load(Ordering::Relaxed) {
                return None;
            }
            match self.rx.recv_timeout(POLL) {
                Ok(item) => return Some(item),
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => return None,
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rx.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.rx.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;
    use std::time::Instant;

    #[test]
    fn third_send_waits_for_a_receive() {
        let (tx, rx) = bounded_channel::<u32>(2).unwrap();
        tx.send(1).unwrap();
        tx.send(2).unwrap();
        assert!(tx.try_send(3).unwrap().is_err());
        let sent = AtomicUsize::new(0);
        std::thread::scope(|s| {
            s.spawn(|| {
                tx.send(3).unwrap();
                sent.store(1, Ordering::SeqCst);
            });
            std::thread::sleep(Duration::from_millis(50));
            assert_eq!(sent.load(Ordering::SeqCst), 0);
            assert_eq!(rx.recv(), Some(1));
        });
        assert_eq!(sent.load(Ordering::SeqCst), 1);
        assert_eq!(rx.recv(), Some(2));
        assert_eq!(rx.recv(), Some(3));
    }

    #[test]
    fn close_signals_end_and_rejects_sends() {
        let (mut tx, rx) = bounded_channel::<u32>(4).unwrap();
        tx.close();
        assert!(tx.is_closed());
        assert_eq!(rx.recv(), None);
        assert!(matches!(tx.send(1), Err(Error::ChannelClosed)));
        assert!(bounded_channel::<u32>(0).is_err());
    }

    #[test]
    fn close_drains_before_end() {
        let (mut tx, rx) = bounded_channel::<u32>(4).unwrap();
        tx.send(7).unwrap();
        tx.close();
        assert_eq!(rx.recv(), Some(7));
        assert_eq!(rx.recv(), None);
    }

    #[test]
    fn conservation_under_backpressure() {
        for cap in [1, 2, 7, 64] {
            let (tx, rx) = bounded_channel::<usize>(cap).unwrap();
            let got = std::thread::scope(|s| {
                for p in 0..3 {
                    let tx = tx.clone();
                    s.spawn(move || {
                        for i in 0..500 {
                            tx.send(p * 1000 + i).unwrap();
                        }
                    });
                }
                drop(tx);
                let h = s.spawn(|| rx.iter().collect::<Vec<_>>());
                h.join().unwrap()
            });
            assert_eq!(got.len(), 1500);
            // FIFO per producer
            for p in 0..3 {
                let mine: Vec<_> = got.iter().filter(|&&x| x / 1000 == p).collect();
                assert!(mine.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn cancellation_unblocks() {
        let (tx, rx) = bounded_channel::<u32>(1).unwrap();
        tx.send(1).unwrap();
        let cancel = AtomicBool::new(true);
        let t = Instant::now();
        assert!(!tx.send_cancellable(2, &cancel).unwrap());
        let (_keep, rx2) = bounded_channel::<u32>(1).unwrap();
        assert_eq!(rx2.recv_cancellable(&cancel), None);
        assert!(t.elapsed() < Duration::from_millis(500));
        assert_eq!(rx.len(), 1);
    }
}
