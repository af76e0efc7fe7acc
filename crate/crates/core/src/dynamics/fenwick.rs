/// Binary indexed tree over non-negative weights with prefix-sum search.
#[derive(Clone, Debug)]
pub struct Fenwick {
    tree: Vec<f64>,
    values: Vec<f64>,
    top: usize,
}

impl Fenwick {
    pub fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut f = Fenwick {
            tree: vec![0.0; n + 1],
            values: values.to_vec(),
            top: n.next_power_of_two(),
        };
        f.rebuild();
        f
    }

    /// Recomputes all partial sums, discarding accumulated rounding.
    pub fn rebuild(&mut self) {
        let n = self.values.len();
        self.tree.iter_mut().for_each(|v| *v = 0.0);
        for i in 1..=n {
            self.tree[i] += self.values[i - 1];
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[i];
            }
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let delta = value - self.values[i];
        self.values[i] = value;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    pub fn total(&self) -> f64 {
        let mut s = 0.0;
        let mut j = self.values.len();
        while j > 0 {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        s
    }

    /// Smallest index `i` with `prefix(i + 1) > target`; clamps to a positive entry.
    pub fn find(&self, target: f64) -> usize {
        let n = self.values.len();
        let mut pos = 0;
        let mut rem = target;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        let mut i = pos.min(n - 1);
        while self.values[i] <= 0.0 && i > 0 {
            i -= 1;
        }
        while self.values[i] <= 0.0 && i + 1 < n {
            i += 1;
        }
        i
    }
}
