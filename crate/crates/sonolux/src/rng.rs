//! Counter-based deterministic noise sampling.
//!
//! Noise draws are keyed on the sample coordinates themselves (bit patterns
//! of position, time and frequency) so that parallel evaluation order never
//! changes the dataset and identical configs reproduce identical files.

/// splitmix64 step.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic uniform draw in `[-1, 1]` keyed on a seed and a list of
/// f64 coordinates (hashed by bit pattern) plus a term tag.
pub fn uniform_pm1(seed: u64, coords: &[f64], tag: u64) -> f64 {
    let mut state = mix(seed ^ 0x5bf0_3635_dead_beef);
    for &c in coords {
        state = mix(state ^ c.to_bits());
    }
    state = mix(state ^ tag);
    let unit = (state >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

/// Deterministic Halton sequence point in the unit cube (bases 2, 3, 5).
pub fn halton3(index: usize) -> [f64; 3] {
    [radical_inverse(index + 1, 2), radical_inverse(index + 1, 3), radical_inverse(index + 1, 5)]
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
        inv = 1.0 / base as f64;
    }
    out
}

/// Low-discrepancy point cloud filling the unit ball, scaled and shifted:
/// Halton points in the cube rejected to the ball. Deterministic.
pub fn ball_cloud(center: [f64; 3], radius: f64, count: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(count);
    let mut i = 0usize;
    while out.len() < count {
        let u = halton3(i);
        i += 1;
        let p = [2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0, 2.0 * u[2] - 1.0];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
            out.push([
                center[0] + radius * p[0],
                center[1] + radius * p[1],
                center[2] + radius * p[2],
            ]);
        }
        if i > 64 * count + 1024 {
            break; // cannot happen (ball fills ~52% of the cube)
        }
    }
    out
}
