use super::{Label, PromptPoint};

/// Deals positives and negatives round-robin into `n_batches` batches.
///
/// The i-th point of each class goes to batch `i % n_batches`, so intra-class
/// order is preserved and every batch stays within one point of label
/// parity when the class counts are equal. Inside a batch the labels
/// alternate, positive first. `n_batches == 0` is treated as 1.
pub fn partition_batches(points: &[PromptPoint], n_batches: usize) -> Vec<Vec<PromptPoint>> {
    let k = n_batches.max(1);
    let mut pos: Vec<Vec<PromptPoint>> = vec![Vec::new(); k];
    let mut neg: Vec<Vec<PromptPoint>> = vec![Vec::new(); k];
    let (mut np, mut nn) = (0usize, 0usize);
    for p in points {
        match p.label {
            Label::Positive => {
                pos[np % k].push(*p);
                np += 1;
            }
            Label::Negative => {
                neg[nn % k].push(*p);
                nn += 1;
            }
        }
    }

    pos.into_iter()
        .zip(neg)
        .map(|(p, n)| {
            let mut batch = Vec::with_capacity(p.len() + n.len());
            let mut pi = p.into_iter();
            let mut ni = n.into_iter();
            loop {
                match (pi.next(), ni.next()) {
                    (None, None) => break,
                    (a, b) => batch.extend(a.into_iter().chain(b)),
                }
            }
            batch
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(n_pos: usize, n_neg: usize) -> Vec<PromptPoint> {
        (0..n_pos + n_neg)
            .map(|i| PromptPoint {
                col: i as u32,
                row: 0,
                label: if i < n_pos { Label::Positive } else { Label::Negative },
                index: i as u32,
            })
            .collect()
    }

    fn counts(b: &[PromptPoint]) -> (usize, usize) {
        let p = b.iter().filter(|p| p.label.is_positive()).count();
        (p, b.len() - p)
    }

    #[test]
    fn thirty_thirty_three_batches() {
        let batches = partition_batches(&pts(30, 30), 3);
        assert_eq!(batches.len(), 3);
        for b in &batches {
            assert_eq!(counts(b), (10, 10));
        }
    }

    #[test]
    fn single_batch_is_identity_set() {
        let input = pts(4, 3);
        let batches = partition_batches(&input, 1);
        assert_eq!(batches.len(), 1);
        let mut got = batches[0].clone();
        got.sort_by_key(|p| p.index);
        assert_eq!(got, input);
    }

    #[test]
    fn five_five_two_batches() {
        let batches = partition_batches(&pts(5, 5), 2);
        assert_eq!(counts(&batches[0]), (3, 3));
        assert_eq!(counts(&batches[1]), (2, 2));
        let pos0: Vec<u32> = batches[0].iter().filter(|p| p.label.is_positive()).map(|p| p.index).collect();
        assert_eq!(pos0, vec![0, 2, 4]);
        assert_eq!(batches[0][0].label, Label::Positive);
        assert_eq!(batches[0][1].label, Label::Negative);
    }
}
