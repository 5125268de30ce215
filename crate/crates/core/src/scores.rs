/// Raw per-class scores for one clip from one classifier. Higher is better.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub scores: Vec<f64>,
}

impl ClassScores {
    pub fn new(scores: Vec<f64>) -> Self {
        ClassScores { scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.scores)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_resolve_to_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
        assert_eq!(argmax(&[-1.0]), 0);
    }
}
