//! Instrumented accounting for bulk voxel buffers.
//!
//! Every voxel buffer in the crate is a [`Buffer`], which charges its byte size
//! to the process-global [`Ledger`] on creation and releases it on drop. The
//! ledger keeps the live total, a high-water mark and a baseline taken at the
//! start of the current job, so residual and peak memory can be measured
//! without an external profiler.
//!
//! While a job runs, the chunk engine opens a *reservation*: a fixed working
//! area sized from the memory budget. Buffers the job thread allocates are
//! drawn from it, and the ledger counts the reservation as live memory for as
//! long as it is open. Allocations beyond its capacity are counted on top.
//!
//! Baseline and peak are process-wide; they describe one job only while a
//! single job runs at a time.

use std::cell::Cell;
use std::marker::PhantomData;
use std::ops::{Deref, DerefMut};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// Point-in-time view of the ledger counters, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLedger {
    pub current_bytes: u64,
    pub peak_bytes: u64,
    pub baseline_bytes: u64,
}

impl MemoryLedger {
    pub fn residual_bytes(&self) -> i64 {
        self.current_bytes as i64 - self.baseline_bytes as i64
    }

    pub fn peak_above_baseline(&self) -> u64 {
        self.peak_bytes.saturating_sub(self.baseline_bytes)
    }
}

#[derive(Debug)]
struct Reservation {
    generation: u64,
    capacity: u64,
    used: u64,
    high_water: u64,
}

#[derive(Debug)]
struct State {
    outside: u64,
    reservations: Vec<Reservation>,
    next_generation: u64,
    peak: u64,
    baseline: u64,
}

impl State {
    fn current(&self) -> u64 {
        self.outside
            + self
                .reservations
                .iter()
                .map(|r| r.capacity.max(r.used))
                .sum::<u64>()
    }

    fn bump_peak(&mut self) {
        let current = self.current();
        if current > self.peak {
            self.peak = current;
        }
    }

    fn reservation_mut(&mut self, generation: u64) -> Option<&mut Reservation> {
        self.reservations
            .iter_mut()
            .find(|r| r.generation == generation)
    }
}

thread_local! {
    // (ledger address, reservation generation) that this thread draws from
    static ACTIVE: Cell<Option<(usize, u64)>> = const { Cell::new(None) };
}

/// Handle recording where a charge was booked, returned by [`Ledger::charge`].
#[derive(Debug)]
pub struct Charge {
    bytes: u64,
    generation: Option<u64>,
}

impl Charge {
    pub fn bytes(&self) -> u64 {
        self.bytes
    }
}

/// A byte-accounting monitor. One global instance backs every [`Buffer`].
#[derive(Debug)]
pub struct Ledger {
    state: Mutex<State>,
}

static GLOBAL: Ledger = Ledger::new();

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl Ledger {
    pub const fn new() -> Self {
        Ledger {
            state: Mutex::new(State {
                outside: 0,
                reservations: Vec::new(),
                next_generation: 1,
                peak: 0,
                baseline: 0,
            }),
        }
    }

    pub fn global() -> &'static Ledger {
        &GLOBAL
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn addr(&self) -> usize {
        self as *const Ledger as usize
    }

    pub fn charge(&self, bytes: u64) -> Charge {
        let active = ACTIVE
            .with(|a| a.get())
            .filter(|(addr, _)| *addr == self.addr())
            .map(|(_, g)| g);
        let mut st = self.lock();
        let generation = match active.and_then(|g| st.reservation_mut(g)) {
            Some(r) => {
                r.used += bytes;
                r.high_water = r.high_water.max(r.used);
                Some(r.generation)
            }
            None => {
                st.outside += bytes;
                None
            }
        };
        st.bump_peak();
        Charge { bytes, generation }
    }

    pub fn release(&self, charge: Charge) {
        let mut st = self.lock();
        match charge.generation.and_then(|g| st.reservation_mut(g)) {
            Some(r) => r.used -= charge.bytes,
            None => st.outside -= charge.bytes,
        }
    }

    pub fn snapshot(&self) -> MemoryLedger {
        let st = self.lock();
        MemoryLedger {
            current_bytes: st.current(),
            peak_bytes: st.peak,
            baseline_bytes: st.baseline,
        }
    }

    /// Starts a job: the baseline becomes the current total and the peak is
    /// reset to it. This is the only place the peak moves downwards.
    pub fn begin_job(&self) -> MemoryLedger {
        let mut st = self.lock();
        st.baseline = st.current();
        st.peak = st.baseline;
        MemoryLedger {
            current_bytes: st.baseline,
            peak_bytes: st.peak,
            baseline_bytes: st.baseline,
        }
    }

    /// Opens a working reservation of `capacity` bytes that buffers allocated
    /// on the calling thread draw from until the guard is closed. Buffers still
    /// alive at that point stay charged.
    pub fn reserve(&self, capacity: u64) -> ReservationGuard<'_> {
        let generation = {
            let mut st = self.lock();
            let generation = st.next_generation;
            st.next_generation += 1;
            st.reservations.push(Reservation {
                generation,
                capacity,
                used: 0,
                high_water: 0,
            });
            st.bump_peak();
            generation
        };
        let previous = ACTIVE.with(|a| a.replace(Some((self.addr(), generation))));
        ReservationGuard {
            ledger: self,
            generation,
            previous,
            closed: false,
            _not_send: PhantomData,
        }
    }

    fn close_reservation(&self, generation: u64) -> u64 {
        let mut st = self.lock();
        match st.reservations.iter().position(|r| r.generation == generation) {
            Some(i) => {
                let r = st.reservations.remove(i);
                // live buffers drawn from the reservation now count directly
                st.outside += r.used;
                r.high_water
            }
            None => 0,
        }
    }
}

/// RAII guard of an open reservation; tied to the thread that opened it.
#[must_use]
pub struct ReservationGuard<'a> {
    ledger: &'a Ledger,
    generation: u64,
    previous: Option<(usize, u64)>,
    closed: bool,
    _not_send: PhantomData<*const ()>,
}

impl ReservationGuard<'_> {
    /// Closes the reservation and returns the largest number of bytes drawn
    /// from it at any time.
    pub fn close(mut self) -> u64 {
        self.finish()
    }

    fn finish(&mut self) -> u64 {
        self.closed = true;
        ACTIVE.with(|a| a.set(self.previous));
        self.ledger.close_reservation(self.generation)
    }
}

impl Drop for ReservationGuard<'_> {
    fn drop(&mut self) {
        if !self.closed {
            self.finish();
        }
    }
}

/// Current counters of the global ledger.
pub fn ledger_snapshot() -> MemoryLedger {
    Ledger::global().snapshot()
}

/// A heap buffer whose size is charged to the global ledger.
pub struct Buffer<T> {
    data: Vec<T>,
    charge: Option<Charge>,
}

impl<T> Buffer<T> {
    pub fn from_vec(data: Vec<T>) -> Self {
        let bytes = (data.len() * std::mem::size_of::<T>()) as u64;
        let charge = Some(Ledger::global().charge(bytes));
        Buffer { data, charge }
    }

    /// Returns the inner vector; its bytes are no longer tracked.
    pub fn into_vec(mut self) -> Vec<T> {
        if let Some(c) = self.charge.take() {
            Ledger::global().release(c);
        }
        std::mem::take(&mut self.data)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn byte_len(&self) -> u64 {
        (self.data.len() * std::mem::size_of::<T>()) as u64
    }
}

impl<T: Clone + Default> Buffer<T> {
    pub fn zeroed(len: usize) -> Self {
        Self::from_vec(vec![T::default(); len])
    }

    pub fn filled(len: usize, value: T) -> Self {
        Self::from_vec(vec![value; len])
    }
}

impl<T> Drop for Buffer<T> {
    fn drop(&mut self) {
        if let Some(c) = self.charge.take() {
            Ledger::global().release(c);
        }
    }
}

impl<T: Clone> Clone for Buffer<T> {
    fn clone(&self) -> Self {
        Buffer::from_vec(self.data.clone())
    }
}

impl<T> Deref for Buffer<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.data
    }
}

impl<T> DerefMut for Buffer<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Buffer<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Buffer")
            .field("len", &self.data.len())
            .finish()
    }
}

impl<T: PartialEq> PartialEq for Buffer<T> {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl<T> FromIterator<T> for Buffer<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        Buffer::from_vec(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIB: u64 = 1 << 20;

    #[test]
    fn release_returns_to_baseline() {
        let ledger = Ledger::new();
        let base = ledger.begin_job();
        let c = ledger.charge(MIB);
        ledger.release(c);
        let snap = ledger.snapshot();
        assert_eq!(snap.current_bytes, base.baseline_bytes);
        assert!(snap.peak_bytes >= base.baseline_bytes + MIB);
        assert_eq!(snap.residual_bytes(), 0);
    }

    #[test]
    fn peak_is_monotone_within_a_job() {
        let ledger = Ledger::new();
        ledger.begin_job();
        let mut peaks = Vec::new();
        let mut live = Vec::new();
        for i in 0..20u64 {
            if i % 3 == 2 {
                if let Some(c) = live.pop() {
                    ledger.release(c);
                }
            } else {
                live.push(ledger.charge(1000 * (i + 1)));
            }
            let s = ledger.snapshot();
            assert!(s.peak_bytes >= s.current_bytes);
            peaks.push(s.peak_bytes);
        }
        assert!(peaks.windows(2).all(|w| w[0] <= w[1]));
        for c in live {
            ledger.release(c);
        }
    }

    #[test]
    fn reservation_counts_as_live_and_absorbs_draws() {
        let ledger = Ledger::new();
        ledger.begin_job();
        let guard = ledger.reserve(10 * MIB);
        assert_eq!(ledger.snapshot().current_bytes, 10 * MIB);
        let a = ledger.charge(4 * MIB);
        assert_eq!(ledger.snapshot().current_bytes, 10 * MIB);
        let b = ledger.charge(8 * MIB);
        assert_eq!(ledger.snapshot().current_bytes, 12 * MIB);
        ledger.release(b);
        ledger.release(a);
        let hw = guard.close();
        assert_eq!(hw, 12 * MIB);
        let s = ledger.snapshot();
        assert_eq!(s.current_bytes, 0);
        assert_eq!(s.peak_bytes, 12 * MIB);
    }

    #[test]
    fn buffers_outliving_a_reservation_stay_charged() {
        let ledger = Ledger::new();
        ledger.begin_job();
        let guard = ledger.reserve(MIB);
        let kept = ledger.charge(300);
        guard.close();
        assert_eq!(ledger.snapshot().current_bytes, 300);
        ledger.release(kept);
        assert_eq!(ledger.snapshot().current_bytes, 0);
    }
}
