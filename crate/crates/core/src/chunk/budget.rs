use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Share of the backend's free memory reserved for chunk working sets.
pub const DEFAULT_FRACTION: f64 = 0.8;

/// Where chunks execute and how much memory it has free.
pub trait ComputeBackend: Send + Sync {
    fn name(&self) -> &str;
    fn free_bytes(&self) -> Result<u64>;
}

/// Host data-parallel backend. Reports a configured cap, or the operating
/// system's available RAM when uncapped.
#[derive(Debug, Clone, Default)]
pub struct HostBackend {
    cap: Option<u64>,
}

impl HostBackend {
    pub fn probed() -> Self {
        HostBackend { cap: None }
    }

    pub fn with_cap(bytes: u64) -> Self {
        HostBackend { cap: Some(bytes) }
    }
}

impl ComputeBackend for HostBackend {
    fn name(&self) -> &str {
        "host"
    }

    fn free_bytes(&self) -> Result<u64> {
        match self.cap {
            Some(c) => Ok(c),
            None => available_ram(),
        }
    }
}

fn available_ram() -> Result<u64> {
    if let Ok(text) = std::fs::read_to_string("/proc/meminfo") {
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("MemAvailable:") {
                let kib: u64 = rest
                    .trim()
                    .trim_end_matches("kB")
                    .trim()
                    .parse()
                    .map_err(|e| Error::BudgetUnavailable(format!("bad MemAvailable line: {e}")))?;
                return Ok(kib * 1024);
            }
        }
    }
    // SAFETY: sysconf has no preconditions.
    let (pages, page) = unsafe {
        (
            libc::sysconf(libc::_SC_AVPHYS_PAGES),
            libc::sysconf(libc::_SC_PAGESIZE),
        )
    };
    if pages > 0 && page > 0 {
        Ok(pages as u64 * page as u64)
    } else {
        Err(Error::BudgetUnavailable(
            "cannot determine available host memory".into(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryBudget {
    pub total_bytes: u64,
    pub fraction: f64,
    pub usable_bytes: u64,
}

impl MemoryBudget {
    pub fn new(total_bytes: u64, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::param(format!(
                "budget fraction must be in (0, 1], got {fraction}"
            )));
        }
        Ok(MemoryBudget {
            total_bytes,
            fraction,
            usable_bytes: (total_bytes as f64 * fraction).floor() as u64,
        })
    }

    /// A budget of exactly `usable_bytes`.
    pub fn fixed(usable_bytes: u64) -> Self {
        MemoryBudget {
            total_bytes: usable_bytes,
            fraction: 1.0,
            usable_bytes,
        }
    }
}

/// Queries free memory and keeps `fraction` of it for chunking.
pub fn profile_budget(backend: &dyn ComputeBackend, fraction: f64) -> Result<MemoryBudget> {
    let free = backend.free_bytes()?;
    MemoryBudget::new(free, fraction)
}

/// Parses sizes like `64MiB`, `1.5GiB`, `512k` or plain byte counts.
pub fn parse_bytes(text: &str) -> Result<u64> {
    let t = text.trim();
    let split = t
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| Error::param(format!("bad byte size {text:?}")))?;
    let mult: u64 = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kb" | "kib" => 1 << 10,
        "m" | "mb" | "mib" => 1 << 20,
        "g" | "gb" | "gib" => 1 << 30,
        other => return Err(Error::param(format!("unknown size unit {other:?}"))),
    };
    Ok((value * mult as f64).round() as u64)
}
