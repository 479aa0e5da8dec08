//! Counter-based seed derivation: a master seed plus a list of labels
//! (stage, instance, repeat, ...) maps to an independent stream seed.
//! Runs are reproducible and arms stay comparable because every trial
//! names its own seed instead of drawing from a shared stream.

pub const STAGE_CHANNEL: u64 = 0xC4A1;
pub const STAGE_GRAPH: u64 = 0x6A90;
pub const STAGE_TRIAL: u64 = 0x7215;
pub const STAGE_TRACE: u64 = 0x7ACE;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream seed from a master seed and a label path.
pub fn derive(master: u64, labels: &[u64]) -> u64 {
    let mut state = splitmix(master ^ 0x6a09_e667_f3bc_c909);
    for (i, &label) in labels.iter().enumerate() {
        let salt = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1);
        state = splitmix(state ^ label.wrapping_add(salt));
    }
    state
}
