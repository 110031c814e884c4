use serde::{Deserialize, Serialize};

/// Default onset matching window (50 ms).
pub const DEFAULT_TOLERANCE_SECS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matches: usize,
}

/// Maximum one-to-one matching of estimated to reference onsets within `tolerance`.
///
/// Both lists must be sorted ascending. Two empty lists score (1, 1, 1); exactly
/// one empty list scores (0, 0, 0).
pub fn match_onsets(est: &[f64], reference: &[f64], tolerance: f64) -> OnsetScores {
    match (est.is_empty(), reference.is_empty()) {
        (true, true) => {
            return OnsetScores {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                matches: 0,
            }
        }
        (true, false) | (false, true) => {
            return OnsetScores {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                matches: 0,
            }
        }
        _ => {}
    }
    debug_assert!(est.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(reference.windows(2).all(|w| w[0] <= w[1]));

    // On the line with a symmetric window, pairing the earliest unmatched
    // points greedily is optimal: the bipartite graph is an interval graph.
    let (mut i, mut j, mut matches) = (0, 0, 0);
    while i < est.len() && j < reference.len() {
        let d = est[i] - reference[j];
        if d.abs() <= tolerance {
            matches += 1;
            i += 1;
            j += 1;
        } else if d < 0.0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    let precision = matches as f64 / est.len() as f64;
    let recall = matches as f64 / reference.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    OnsetScores {
        precision,
        recall,
        f1,
        matches,
    }
}
