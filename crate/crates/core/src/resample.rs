//! Rate reduction by plain decimation.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::Recording;

/// Keeps every `factor`-th frame starting at frame 0 and divides the
/// sampling rate by `factor`. No anti-alias filtering is applied.
pub fn downsample(recording: &Recording, factor: usize) -> Result<Recording> {
    if factor == 0 {
        return Err(Error::argument("downsample factor must be at least 1"));
    }
    if factor > 1 && factor > recording.n_frames() {
        return Err(Error::argument("downsample factor exceeds frame count"));
    }
    if factor == 1 {
        return Ok(recording.clone());
    }
    let c = recording.n_channels();
    let kept = recording.n_frames().div_ceil(factor);
    let mut samples = Vec::with_capacity(kept * c);
    let mut labels = Vec::with_capacity(kept);
    for f in (0..recording.n_frames()).step_by(factor) {
        samples.extend_from_slice(recording.frame(f));
        labels.push(recording.frame_labels()[f]);
    }
    Recording::new(
        recording.subject_id(),
        recording.sampling_rate_hz() / factor as f64,
        recording.channels().to_vec(),
        samples,
        labels,
    )
}
