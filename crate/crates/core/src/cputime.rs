//! Per-thread CPU clock. Runs are measured in thread CPU time so that
//! concurrent workers do not charge each other.

#[derive(Debug, Clone, Copy)]
pub struct CpuClock {
    start: f64,
}

impl CpuClock {
    pub fn start() -> CpuClock {
        CpuClock {
            start: thread_cpu_seconds(),
        }
    }

    pub fn elapsed(&self) -> f64 {
        (thread_cpu_seconds() - self.start).max(0.0)
    }
}

/// CPU seconds consumed by the calling thread.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}
