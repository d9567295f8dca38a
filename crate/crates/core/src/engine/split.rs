//! Windowed per-source precision and roulette source selection.

use rand::Rng;

use crate::session::{Bucket, Source};

/// Windowed precision of one source: accepted over issued in the last `w`
/// rounds, or 1 when nothing was issued.
pub fn windowed_precision(bucket: &Bucket, source: Source, w: u64, now: u64) -> f64 {
    let issued = bucket.suggested.count_window(source, w, now);
    if issued == 0 {
        return 1.0;
    }
    bucket.correct.count_window(source, w, now) as f64 / issued as f64
}

/// `(p_class, p_nn)` for a bucket at round `now`.
pub fn compute_split(bucket: &Bucket, w: u64, now: u64) -> (f64, f64) {
    (
        windowed_precision(bucket, Source::Classifier, w, now),
        windowed_precision(bucket, Source::Nn, w, now),
    )
}

/// Map a uniform draw in `[0, 1)` onto a source.
pub fn source_for_draw(r: f64, p_class: f64, p_nn: f64) -> Source {
    if r < p_class {
        Source::Classifier
    } else if r < p_class + (1.0 - p_class) * p_nn {
        Source::Nn
    } else {
        Source::Explorer
    }
}

pub fn roulette_source<R: Rng + ?Sized>(p_class: f64, p_nn: f64, rng: &mut R) -> Source {
    source_for_draw(rng.random::<f64>(), p_class, p_nn)
}
