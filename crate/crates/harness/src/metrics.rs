use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ii20_core::dataset::GroundTruth;
use ii20_core::session::SessionState;
use ii20_core::BucketId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketMetrics {
    pub bucket: BucketId,
    pub label: String,
    pub members: usize,
    pub correct: usize,
    pub relevant: usize,
    /// `None` for an empty bucket.
    pub precision: Option<f64>,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub buckets: Vec<BucketMetrics>,
    /// Mean over buckets with a defined precision.
    pub macro_precision: Option<f64>,
    pub macro_recall: f64,
}

/// Precision and recall of each bucket against the label it stands for.
/// A pure function of the session state.
pub fn compute_metrics(session: &SessionState, truth: &GroundTruth, relevance: &[(u32, BucketId)]) -> Metrics {
    let buckets: Vec<BucketMetrics> = relevance
        .iter()
        .map(|&(label, b)| {
            let (members, correct) = match session.bucket(b) {
                Ok(bucket) => (
                    bucket.members.len(),
                    bucket.members.iter().filter(|m| truth.has(m.image, label)).count(),
                ),
                Err(_) => (0, 0),
            };
            let relevant = truth.count(label);
            BucketMetrics {
                bucket: b,
                label: truth.dictionary()[label as usize].clone(),
                members,
                correct,
                relevant,
                precision: (members > 0).then(|| correct as f64 / members as f64),
                recall: if relevant == 0 { 0.0 } else { correct as f64 / relevant as f64 },
            }
        })
        .collect();
    let defined: Vec<f64> = buckets.iter().filter_map(|b| b.precision).collect();
    let macro_precision = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let macro_recall = if buckets.is_empty() {
        0.0
    } else {
        buckets.iter().map(|b| b.recall).sum::<f64>() / buckets.len() as f64
    };
    Metrics {
        buckets,
        macro_precision,
        macro_recall,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: u64,
    /// Images shown to the actor so far, judged or ignored.
    pub processed: usize,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub round: u64,
    pub suggest_secs: f64,
    pub feedback_secs: f64,
    pub cumulative_secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MistakeCounts {
    pub judgments: usize,
    pub ignore: usize,
    pub flip: usize,
    pub confuse: usize,
}

impl MistakeCounts {
    pub fn total(&self) -> usize {
        self.ignore + self.flip + self.confuse
    }
}

/// Per-round metrics of one actor session. Wall-clock timings live in a
/// separate table so the metrics themselves are reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub labels: Vec<String>,
    pub rows: Vec<MetricsRow>,
    pub timings: Vec<TimingRow>,
    pub mistakes: MistakeCounts,
    /// Why the session stopped before its budget, if it did.
    pub ended_early: Option<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsLog {
    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    /// Metrics as of `processed` images: the last row not beyond it.
    pub fn at(&self, processed: usize) -> Option<&MetricsRow> {
        if self.rows.last().is_none_or(|r| r.processed < processed) {
            return None;
        }
        self.rows.iter().rev().find(|r| r.processed <= processed)
    }

    pub fn write_csv(&self, out: impl Write) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["round".to_owned(), "processed".into(), "macro_precision".into(), "macro_recall".into()];
        for l in &self.labels {
            header.push(format!("members_{l}"));
            header.push(format!("precision_{l}"));
            header.push(format!("recall_{l}"));
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.round.to_string(),
                row.processed.to_string(),
                opt(row.metrics.macro_precision),
                row.metrics.macro_recall.to_string(),
            ];
            for b in &row.metrics.buckets {
                rec.push(b.members.to_string());
                rec.push(opt(b.precision));
                rec.push(b.recall.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_bytes(&self) -> anyhow::Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn write_timing_csv(&self, out: impl Write) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for t in &self.timings {
            w.serialize(t)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, metrics_path: &Path, timing_path: &Path) -> anyhow::Result<()> {
        self.write_csv(std::fs::File::create(metrics_path)?)?;
        self.write_timing_csv(std::fs::File::create(timing_path)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ii20_core::{ImageId, Target};

    /// Six images, two labels, hand-checked numbers.
    #[test]
    fn six_image_session() {
        let mut truth = GroundTruth::new(6);
        for (i, l) in ["a", "a", "a", "b", "b", "c"].iter().enumerate() {
            truth.add(ImageId(i as u32), l).unwrap();
        }
        let a = truth.label_index("a").unwrap();
        let b = truth.label_index("b").unwrap();
        let mut s = SessionState::new(6);
        let ba = s.create_bucket("a", true).unwrap();
        let bb = s.create_bucket("b", true).unwrap();
        s.assign(ImageId(0), ba.into(), 0).unwrap();
        s.assign(ImageId(1), ba.into(), 0).unwrap();
        s.assign(ImageId(3), ba.into(), 0).unwrap();
        s.assign(ImageId(5), Target::Discard, 0).unwrap();
        let m = compute_metrics(&s, &truth, &[(a, ba), (b, bb)]);
        assert_eq!(m.buckets[0].precision, Some(2.0 / 3.0));
        assert_eq!(m.buckets[0].recall, 2.0 / 3.0);
        assert_eq!(m.buckets[1].precision, None);
        assert_eq!(m.buckets[1].recall, 0.0);
        assert_eq!(m.macro_precision, Some(2.0 / 3.0));
        assert_eq!(m.macro_recall, 1.0 / 3.0);

        s.assign(ImageId(4), bb.into(), 1).unwrap();
        let m = compute_metrics(&s, &truth, &[(a, ba), (b, bb)]);
        assert_eq!(m.buckets[1].precision, Some(1.0));
        assert_eq!(m.buckets[1].recall, 0.5);
        assert_eq!(m.macro_precision, Some((2.0 / 3.0 + 1.0) / 2.0));
        assert_eq!(m.macro_recall, (2.0 / 3.0 + 0.5) / 2.0);
    }

    #[test]
    fn perfect_bucket() {
        let mut truth = GroundTruth::new(30);
        for i in 0..30u32 {
            truth.add(ImageId(i), if i < 20 { "x" } else { "y" }).unwrap();
        }
        let x = truth.label_index("x").unwrap();
        let mut s = SessionState::new(30);
        let b = s.create_bucket("x", true).unwrap();
        for i in 0..10 {
            s.assign(ImageId(i), b.into(), 0).unwrap();
        }
        let m = compute_metrics(&s, &truth, &[(x, b)]);
        assert_eq!(m.buckets[0].precision, Some(1.0));
        assert_eq!(m.buckets[0].recall, 10.0 / 20.0);
    }
}
