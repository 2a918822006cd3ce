/// Binary max-heap over variable indices, ordered by an external score
/// array. Uniformly scaling every score keeps the heap valid.
#[derive(Debug, Clone, Default)]
pub(crate) struct VarHeap {
    heap: Vec<u32>,
    position: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl VarHeap {
    pub fn new(num_vars: usize) -> VarHeap {
        VarHeap {
            heap: Vec::with_capacity(num_vars),
            position: vec![ABSENT; num_vars],
        }
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        self.position[v] != ABSENT
    }

    #[cfg(test)]
    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn insert(&mut self, v: usize, score: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.position[v] = self.heap.len() as u32;
        self.heap.push(v as u32);
        self.sift_up(self.heap.len() - 1, score);
    }

    /// Restores order after `score[v]` increased.
    pub fn increased(&mut self, v: usize, score: &[f64]) {
        if self.contains(v) {
            self.sift_up(self.position[v] as usize, score);
        }
    }

    pub fn pop(&mut self, score: &[f64]) -> Option<usize> {
        let top = *self.heap.first()? as usize;
        let last = self.heap.pop().unwrap();
        self.position[top] = ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = 0;
            self.sift_down(0, score);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, score: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if score[p as usize] >= score[v as usize] {
                break;
            }
            self.heap[i] = p;
            self.position[p as usize] = i as u32;
            i = parent;
        }
        self.heap[i] = v;
        self.position[v as usize] = i as u32;
    }

    fn sift_down(&mut self, mut i: usize, score: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n
                && score[self.heap[right] as usize] > score[self.heap[left] as usize]
            {
                right
            } else {
                left
            };
            let c = self.heap[child];
            if score[c as usize] <= score[v as usize] {
                break;
            }
            self.heap[i] = c;
            self.position[c as usize] = i as u32;
            i = child;
        }
        self.heap[i] = v;
        self.position[v as usize] = i as u32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_score_order() {
        let mut score = vec![0.5, 3.0, 1.0, 2.0, 0.1];
        let mut heap = VarHeap::new(score.len());
        for v in 0..score.len() {
            heap.insert(v, &score);
        }
        score[4] = 10.0;
        heap.increased(4, &score);
        let order: Vec<usize> = std::iter::from_fn(|| heap.pop(&score)).collect();
        assert_eq!(order, vec![4, 1, 3, 2, 0]);
        assert!(heap.is_empty());
    }
}
