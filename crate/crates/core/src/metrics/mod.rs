//! Sample-quality metrics: Fréchet distance between feature Gaussians,
//! inception-style scores and the small classifier that supplies features.

mod classifier;
mod fid;
pub mod linalg;
mod score;

use std::fmt::Write as _;

pub use classifier::{classifier_features, decode_tokens, ClassifierConfig, TinyClassifier};
pub use fid::{fit_gaussian, frechet_distance, GaussianStats};
pub use score::{am_score, inception_score, modified_inception_score, modified_is_and_am};

/// Named scalar results, rendered as `key=value` lines or a CSV row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub entries: Vec<(String, f64)>,
}

impl MetricsReport {
    pub fn push(&mut self, key: impl Into<String>, value: f64) {
        self.entries.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn csv_header(&self) -> String {
        self.entries.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(",")
    }

    pub fn csv_row(&self) -> String {
        self.entries.iter().map(|(_, v)| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_formats() {
        let mut r = MetricsReport::default();
        r.push("fid", 1.5);
        r.push("is", 3.0);
        assert_eq!(r.to_text(), "fid=1.5\nis=3\n");
        assert_eq!(r.csv_header(), "fid,is");
        assert_eq!(r.csv_row(), "1.5,3");
        assert_eq!(r.get("is"), Some(3.0));
    }
}
