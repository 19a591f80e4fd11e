//! Closed-form model of the contention phase and its Monte Carlo oracle.
//!
//! During the contention slots of a frame, nodes that want to initiate a new
//! transmission run a mini-slot CSMA: each draws a backoff uniform in
//! `[0, W-1]`, counts down during idle mini-slots, freezes while the channel
//! is busy, and transmits a request when its counter expires. The analytic
//! model predicts the expected number of successful requests per frame and
//! the expected delay until a node's request gets through; the Monte Carlo
//! simulator of the same mini-slot process serves as its independent check.
//!
//! All durations in this module are in microseconds.

use rand::Rng;

/// Parameters of one frame's contention phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionParams {
    /// Contenders within one carrier-sensing range.
    pub n_prime: u32,
    /// Contention window size.
    pub w: u32,
    /// Total duration of the frame's contention slots, µs.
    pub t_cp: f64,
    /// Mini-slot duration, µs.
    pub t_s: f64,
    /// Request packet duration, µs.
    pub t_r: f64,
    /// Frame duration, µs.
    pub t_f: f64,
}

impl ContentionParams {
    /// Defaults matching the evaluation setup: 20 µs mini-slots, 240 µs
    /// requests (PHY preamble plus a 200-bit payload at the control rate,
    /// rounded up to whole mini-slots), 100 ms frames.
    pub fn new(n_prime: u32, w: u32, t_cp: f64) -> Self {
        Self {
            n_prime,
            w,
            t_cp,
            t_s: 20.0,
            t_r: 240.0,
            t_f: 100_000.0,
        }
    }
}

/// Per-mini-slot outcome probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotProbabilities {
    /// Probability a mini-slot is idle.
    pub delta_i: f64,
    /// Probability a mini-slot starts exactly one request (success).
    pub delta_s: f64,
    /// Probability a mini-slot starts two or more requests (collision).
    pub delta_c: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ContentionError {
    #[error("contention window must be at least 1")]
    WindowTooSmall,
    #[error("no contenders: the contention process is empty")]
    NoContenders,
    #[error("expected successes is zero: delay is unbounded")]
    UnboundedDelay,
}

/// Probabilities that an idle-decision mini-slot stays idle, carries one
/// request start, or carries a collision, for `n_prime` contenders each
/// firing with probability `1/w`.
pub fn slot_probabilities(n_prime: u32, w: u32) -> Result<SlotProbabilities, ContentionError> {
    if w < 1 {
        return Err(ContentionError::WindowTooSmall);
    }
    let n = n_prime as f64;
    let p = 1.0 / w as f64;
    let q = 1.0 - p;
    // 0^0 = 1 covers the degenerate cases (n' = 0, or w = 1).
    let delta_i = q.powi(n_prime as i32);
    let delta_s = if n_prime == 0 {
        0.0
    } else {
        n * p * q.powi(n_prime as i32 - 1)
    };
    let delta_c = (1.0 - delta_i - delta_s).max(0.0);
    Ok(SlotProbabilities {
        delta_i,
        delta_s,
        delta_c,
    })
}

/// Mean idle mini-slots per cycle and mean cycle duration (µs). A cycle is
/// the span between consecutive transmission starts on the channel.
pub fn mean_cycle(params: &ContentionParams) -> Result<(f64, f64), ContentionError> {
    if params.n_prime == 0 {
        return Err(ContentionError::NoContenders);
    }
    let probs = slot_probabilities(params.n_prime, params.w)?;
    let m_bar = 1.0 / (1.0 - probs.delta_i);
    let t_cy = m_bar * params.t_s + params.t_r;
    Ok((m_bar, t_cy))
}

/// Expected number of successful transmission requests in the contention
/// slots of one frame: `min(W/m, T_cp/T_cy) * delta_S / (delta_S + delta_C)`.
pub fn expected_successes(params: &ContentionParams) -> Result<f64, ContentionError> {
    if params.n_prime == 0 {
        return Err(ContentionError::NoContenders);
    }
    if params.t_cp <= 0.0 {
        return Ok(0.0);
    }
    let probs = slot_probabilities(params.n_prime, params.w)?;
    let (m_bar, t_cy) = mean_cycle(params)?;
    let cycles = (params.w as f64 / m_bar).min(params.t_cp / t_cy);
    let busy = probs.delta_s + probs.delta_c;
    if busy <= 0.0 {
        return Ok(0.0);
    }
    Ok(cycles * probs.delta_s / busy)
}

/// Per-frame success probability for one contender.
pub fn success_probability(params: &ContentionParams) -> Result<f64, ContentionError> {
    Ok(expected_successes(params)? / params.n_prime as f64)
}

/// Expected delay (µs) until a contender's request gets through:
/// `T_f * N' / Q`.
pub fn expected_delay(params: &ContentionParams) -> Result<f64, ContentionError> {
    let q_bar = expected_successes(params)?;
    if q_bar <= 0.0 {
        return Err(ContentionError::UnboundedDelay);
    }
    Ok(params.t_f * params.n_prime as f64 / q_bar)
}

/// Optimal contention window: integer argmax of expected successes over
/// `[1, w_max]`, ties resolved to the smaller window.
pub fn optimize_window(n_prime: u32, t_cp: f64, t_s: f64, t_r: f64, w_max: u32) -> u32 {
    let mut best_w = 1;
    let mut best_q = f64::NEG_INFINITY;
    for w in 1..=w_max.max(1) {
        let params = ContentionParams {
            n_prime,
            w,
            t_cp,
            t_s,
            t_r,
            t_f: 0.0,
        };
        let q = expected_successes(&params).unwrap_or(0.0);
        if q > best_q * (1.0 + 1e-12) {
            best_q = q;
            best_w = w;
        }
    }
    best_w
}

/// Estimate the number of contenders from observed mini-slot statistics by
/// inverting the idle probability; falls back to the success probability
/// when the idle observation is degenerate.
pub fn estimate_contenders(observed: SlotProbabilities, w_prev: u32) -> u32 {
    let w = w_prev.max(1) as f64;
    if w_prev > 1 && observed.delta_i > 0.0 && observed.delta_i < 1.0 {
        let n = observed.delta_i.ln() / (1.0 - 1.0 / w).ln();
        return n.round().max(0.0) as u32;
    }
    if observed.delta_i >= 1.0 && observed.delta_s <= 0.0 {
        return 0;
    }
    // delta_S inversion: nearest n by scanning (delta_S is unimodal in n).
    let mut best_n = 0;
    let mut best_err = f64::INFINITY;
    for n in 0..=4096u32 {
        let p = slot_probabilities(n, w_prev.max(1)).unwrap();
        let err = (p.delta_s - observed.delta_s).abs();
        if err < best_err {
            best_err = err;
            best_n = n;
        }
    }
    best_n
}

/// Exponential smoothing of contender estimates across frames.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmoothedEstimate {
    value: Option<f64>,
}

impl SmoothedEstimate {
    pub fn update(&mut self, sample: u32) -> u32 {
        let v = match self.value {
            None => sample as f64,
            Some(prev) => 0.5 * prev + 0.5 * sample as f64,
        };
        self.value = Some(v);
        v.round() as u32
    }

    pub fn current(&self) -> Option<u32> {
        self.value.map(|v| v.round() as u32)
    }
}

/// Result of sizing the contention phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContentionSizing {
    pub slots: u32,
    pub feasible: bool,
}

/// Smallest number of contention slots meeting the target request delay,
/// with the window optimized per candidate size. Returns at least one slot
/// so a request channel stays open; returns the cap with `feasible: false`
/// when even the cap cannot meet the target.
pub fn size_contention_slots(
    n_hat: u32,
    target_delay: f64,
    slot_len: f64,
    t_s: f64,
    t_r: f64,
    t_f: f64,
    max_slots: u32,
) -> ContentionSizing {
    let cap = max_slots.max(1);
    if n_hat == 0 {
        return ContentionSizing {
            slots: 1,
            feasible: true,
        };
    }
    for s in 1..=cap {
        let t_cp = s as f64 * slot_len;
        let w = optimize_window(n_hat, t_cp, t_s, t_r, 1024);
        let params = ContentionParams {
            n_prime: n_hat,
            w,
            t_cp,
            t_s,
            t_r,
            t_f,
        };
        match expected_delay(&params) {
            Ok(d) if d <= target_delay => {
                return ContentionSizing {
                    slots: s,
                    feasible: true,
                }
            }
            _ => {}
        }
    }
    ContentionSizing {
        slots: cap,
        feasible: false,
    }
}

/// Empirical contention statistics from the mini-slot simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionEstimate {
    /// Mean successful requests per frame.
    pub q_mean: f64,
    /// Standard error of `q_mean`.
    pub q_stderr: f64,
    /// Mean delay (µs) until a tagged contender's request succeeds.
    pub d_mean: f64,
    /// Standard error of `d_mean`.
    pub d_stderr: f64,
}

/// Outcome of one simulated contention frame.
struct FrameOutcome {
    successes: u32,
    tagged_success: bool,
}

/// Simulates the mini-slot process for one frame.
///
/// Each contender draws a backoff uniform in `[0, W-1]` and fires after that
/// many idle mini-slots, freezing while requests occupy the channel; equal
/// draws collide. Each node fires at most once per frame. A request whose
/// majority lies within the contention budget is counted, the unbiased
/// tie-break for the cycle straddling the end of the period.
fn simulate_frame<R: Rng>(
    params: &ContentionParams,
    counts: &mut [u32],
    rng: &mut R,
) -> FrameOutcome {
    let w = params.w as usize;
    counts[..w].fill(0);
    let mut tagged_draw = 0usize;
    for i in 0..params.n_prime {
        let b = rng.random_range(0..w);
        counts[b] += 1;
        if i == 0 {
            tagged_draw = b;
        }
    }
    let mut successes = 0;
    let mut tagged_success = false;
    let mut event_index = 0u32;
    for (value, &count) in counts[..w].iter().enumerate() {
        if count == 0 {
            continue;
        }
        let start = value as f64 * params.t_s + event_index as f64 * params.t_r;
        if start + params.t_r / 2.0 > params.t_cp {
            break;
        }
        event_index += 1;
        if count == 1 {
            successes += 1;
            if value == tagged_draw {
                tagged_success = true;
            }
        }
    }
    FrameOutcome {
        successes,
        tagged_success,
    }
}

/// Monte Carlo oracle for the contention model: repeatedly simulates the
/// frame's mini-slot process and reports the empirical mean successes per
/// frame, plus the empirical mean delay for a tagged contender re-drawing
/// its backoff each frame until its request gets through.
pub fn monte_carlo_contention<R: Rng>(
    params: &ContentionParams,
    replications: u32,
    rng: &mut R,
) -> ContentionEstimate {
    assert!(replications >= 1);
    assert!(params.w >= 1);
    let mut counts = vec![0u32; params.w as usize];

    let mut q_sum = 0.0;
    let mut q_sq = 0.0;
    for _ in 0..replications {
        let out = simulate_frame(params, &mut counts, rng);
        let q = out.successes as f64;
        q_sum += q;
        q_sq += q * q;
    }
    let n = replications as f64;
    let q_mean = q_sum / n;
    let q_var = (q_sq / n - q_mean * q_mean).max(0.0);
    let q_stderr = (q_var / n).sqrt();

    // Delay trials: frames until the tagged node succeeds, capped.
    const MAX_FRAMES: u64 = 200_000;
    let trials = (replications / 10).clamp(1, 4000);
    let mut d_sum = 0.0;
    let mut d_sq = 0.0;
    for _ in 0..trials {
        let mut frames = 0u64;
        loop {
            frames += 1;
            if simulate_frame(params, &mut counts, rng).tagged_success || frames >= MAX_FRAMES {
                break;
            }
        }
        let d = frames as f64 * params.t_f;
        d_sum += d;
        d_sq += d * d;
    }
    let tn = trials as f64;
    let d_mean = d_sum / tn;
    let d_var = (d_sq / tn - d_mean * d_mean).max(0.0);
    let d_stderr = (d_var / tn).sqrt();

    ContentionEstimate {
        q_mean,
        q_stderr,
        d_mean,
        d_stderr,
    }
}
