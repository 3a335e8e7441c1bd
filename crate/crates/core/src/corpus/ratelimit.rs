use std::cell::Cell;
use std::collections::VecDeque;

use chrono::{DateTime, TimeDelta, Utc};

use super::TweetRecord;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RateLimitError {
    #[error("clock went backwards: {now} is earlier than previously seen {last_seen}")]
    NonMonotonicClock { now: DateTime<Utc>, last_seen: DateTime<Utc> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Permit {
    Granted,
    Denied { retry_at: DateTime<Utc> },
}

/// Request budget of `max_requests` per `window_length`.
///
/// Grants are kept in a log so that no half-open span `[s, s + window)`
/// ever contains more than `max_requests` grants, whatever the schedule.
/// A grant leaves the window once `now - granted_at >= window_length`.
#[derive(Clone, Debug)]
pub struct RateLimitState {
    window_length: TimeDelta,
    max_requests: usize,
    grants: VecDeque<DateTime<Utc>>,
    last_seen: DateTime<Utc>,
}

impl RateLimitState {
    /// 900 requests per 15 minutes.
    pub fn standard(start: DateTime<Utc>) -> Self {
        Self::new(start, TimeDelta::minutes(15), 900)
    }

    pub fn new(start: DateTime<Utc>, window_length: TimeDelta, max_requests: usize) -> Self {
        RateLimitState {
            window_length,
            max_requests,
            grants: VecDeque::new(),
            last_seen: start,
        }
    }

    pub fn window_length(&self) -> TimeDelta {
        self.window_length
    }

    pub fn max_requests(&self) -> usize {
        self.max_requests
    }

    /// Start of the current window: the oldest grant still counted, or the
    /// latest observed instant when the window is empty.
    pub fn window_start(&self) -> DateTime<Utc> {
        self.grants.front().copied().unwrap_or(self.last_seen)
    }

    pub fn requests_in_window(&self) -> usize {
        self.grants.len()
    }

    pub fn acquire_permit(&mut self, now: DateTime<Utc>) -> Result<Permit, RateLimitError> {
        if now < self.last_seen {
            return Err(RateLimitError::NonMonotonicClock {
                now,
                last_seen: self.last_seen,
            });
        }
        self.last_seen = now;
        while self.grants.front().is_some_and(|&g| now - g >= self.window_length) {
            self.grants.pop_front();
        }
        if self.grants.len() < self.max_requests {
            self.grants.push_back(now);
            return Ok(Permit::Granted);
        }
        let retry_at = match self.grants.front() {
            Some(&oldest) => oldest + self.window_length,
            None => now + self.window_length,
        };
        Ok(Permit::Denied { retry_at })
    }
}

pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
    fn sleep_until(&self, t: DateTime<Utc>);
}

/// Manually driven clock; sleeping jumps straight to the target instant.
#[derive(Debug)]
pub struct SimulatedClock {
    now: Cell<DateTime<Utc>>,
}

impl SimulatedClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        SimulatedClock { now: Cell::new(start) }
    }

    pub fn advance(&self, by: TimeDelta) {
        self.now.set(self.now.get() + by);
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> DateTime<Utc> {
        self.now.get()
    }

    fn sleep_until(&self, t: DateTime<Utc>) {
        if t > self.now.get() {
            self.now.set(t);
        }
    }
}

#[derive(Clone, Debug)]
pub struct FetchedPage {
    pub fetched_at: DateTime<Utc>,
    pub records: Vec<TweetRecord>,
}

/// Replays a record source as paged API requests: one permit per page,
/// sleeping on the clock whenever the budget is exhausted.
pub fn simulate_fetch<C: Clock>(
    source: &[TweetRecord],
    page_size: usize,
    limiter: &mut RateLimitState,
    clock: &C,
) -> Result<Vec<FetchedPage>, RateLimitError> {
    assert!(page_size > 0, "page size must be positive");
    let mut pages = Vec::new();
    for chunk in source.chunks(page_size) {
        loop {
            let now = clock.now();
            match limiter.acquire_permit(now)? {
                Permit::Granted => {
                    pages.push(FetchedPage {
                        fetched_at: now,
                        records: chunk.to_vec(),
                    });
                    break;
                }
                Permit::Denied { retry_at } => clock.sleep_until(retry_at),
            }
        }
    }
    Ok(pages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn nine_hundred_then_denied() {
        let mut s = RateLimitState::standard(t0());
        for _ in 0..900 {
            assert_eq!(s.acquire_permit(t0()).unwrap(), Permit::Granted);
        }
        assert_eq!(s.requests_in_window(), 900);
        assert_eq!(
            s.acquire_permit(t0()).unwrap(),
            Permit::Denied {
                retry_at: t0() + TimeDelta::minutes(15)
            }
        );
        let later = t0() + TimeDelta::minutes(15);
        assert_eq!(s.acquire_permit(later).unwrap(), Permit::Granted);
        assert_eq!(s.requests_in_window(), 1);
        assert_eq!(s.window_start(), later);
    }

    #[test]
    fn zero_budget_denies_everything() {
        let mut s = RateLimitState::new(t0(), TimeDelta::minutes(15), 0);
        for m in 0..40 {
            assert!(matches!(
                s.acquire_permit(t0() + TimeDelta::minutes(m)).unwrap(),
                Permit::Denied { .. }
            ));
        }
    }

    #[test]
    fn backwards_clock_is_an_error() {
        let mut s = RateLimitState::standard(t0());
        s.acquire_permit(t0() + TimeDelta::seconds(5)).unwrap();
        assert!(matches!(s.acquire_permit(t0()), Err(RateLimitError::NonMonotonicClock { .. })));
        let mut fresh = RateLimitState::standard(t0());
        assert!(fresh.acquire_permit(t0() - TimeDelta::seconds(1)).is_err());
    }

    #[test]
    fn fetch_waits_out_the_window() {
        let source: Vec<TweetRecord> = (0..2000)
            .map(|i| TweetRecord {
                id: i.to_string(),
                text: "ppkm".into(),
                created_at: None,
                matched_keywords: vec![],
            })
            .collect();
        let clock = SimulatedClock::new(t0());
        let mut limiter = RateLimitState::new(t0(), TimeDelta::minutes(15), 3);
        let pages = simulate_fetch(&source, 100, &mut limiter, &clock).unwrap();
        assert_eq!(pages.len(), 20);
        assert_eq!(pages.iter().map(|p| p.records.len()).sum::<usize>(), 2000);
        assert_eq!(pages[3].fetched_at, t0() + TimeDelta::minutes(15));
        assert_eq!(pages[19].fetched_at, t0() + TimeDelta::minutes(15 * 6));
    }

    proptest! {
        #[test]
        fn no_span_exceeds_budget(gaps in proptest::collection::vec(0i64..2000, 1..600), max in 0usize..20) {
            let window = TimeDelta::seconds(900);
            let mut s = RateLimitState::new(t0(), window, max);
            let mut now = t0();
            let mut granted = Vec::new();
            for g in gaps {
                now += TimeDelta::milliseconds(g * 100);
                if s.acquire_permit(now).unwrap() == Permit::Granted {
                    granted.push(now);
                }
                prop_assert!(s.requests_in_window() <= max);
            }
            for (i, &start) in granted.iter().enumerate() {
                let in_span = granted[i..].iter().take_while(|&&g| g - start < window).count();
                prop_assert!(in_span <= max);
            }
        }
    }
}
