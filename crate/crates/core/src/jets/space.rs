use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Highest derivative order any jet may carry.
pub const MAX_ORDER: usize = 4;

type SpaceCache = HashMap<(usize, usize), Arc<JetSpace>>;

/// Index layout shared by every jet with the same domain dimension and order.
///
/// Multi-indices are stored graded by total degree, so the layout of a lower
/// order is always a prefix of the layout of a higher order and truncation is
/// a slice.
#[derive(Debug)]
pub struct JetSpace {
    dim: usize,
    order: usize,
    indices: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    degree: Vec<usize>,
    /// `raise[i][a]` is the slot of `a + e_i`, or `usize::MAX` if that would exceed the order.
    raise: Vec<Vec<usize>>,
    /// Leibniz table: (target, left, right, binomial weight).
    product: Vec<(u32, u32, u32, f64)>,
}

fn degree_block(dim: usize, degree: usize) -> Vec<Vec<u8>> {
    if dim == 0 {
        return if degree == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut rest in degree_block(dim - 1, degree - first) {
            let mut idx = Vec::with_capacity(dim);
            idx.push(first as u8);
            idx.append(&mut rest);
            out.push(idx);
        }
    }
    out
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * f64::from(n - i) / f64::from(i + 1);
    }
    r
}

impl JetSpace {
    fn build(dim: usize, order: usize) -> Self {
        let mut indices = Vec::new();
        for d in 0..=order {
            indices.extend(degree_block(dim, d));
        }
        let lookup: HashMap<Vec<u8>, usize> =
            indices.iter().enumerate().map(|(k, a)| (a.clone(), k)).collect();
        let degree = indices
            .iter()
            .map(|a| a.iter().map(|&v| v as usize).sum())
            .collect::<Vec<usize>>();

        let raise = (0..dim)
            .map(|i| {
                indices
                    .iter()
                    .map(|a| {
                        let mut b = a.clone();
                        b[i] += 1;
                        lookup.get(&b).copied().unwrap_or(usize::MAX)
                    })
                    .collect()
            })
            .collect();

        let mut product = Vec::new();
        for (g, gamma) in indices.iter().enumerate() {
            // enumerate all alpha <= gamma componentwise
            let mut alpha = vec![0u8; dim];
            loop {
                let beta: Vec<u8> = gamma.iter().zip(&alpha).map(|(g, a)| g - a).collect();
                let w: f64 = gamma.iter().zip(&alpha).map(|(&g, &a)| binomial(g, a)).product();
                product.push((g as u32, lookup[&alpha] as u32, lookup[&beta] as u32, w));
                // odometer increment
                let mut k = 0;
                loop {
                    if k == dim {
                        break;
                    }
                    if alpha[k] < gamma[k] {
                        alpha[k] += 1;
                        break;
                    }
                    alpha[k] = 0;
                    k += 1;
                }
                if k == dim {
                    break;
                }
            }
        }

        JetSpace {
            dim,
            order,
            indices,
            lookup,
            degree,
            raise,
            product,
        }
    }

    /// Shared space for `(dim, order)`; spaces are built once per process.
    pub fn get(dim: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<SpaceCache>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((dim, order))
            .or_insert_with(|| Arc::new(JetSpace::build(dim, order)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored partials.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of slots whose total degree is at most `order`.
    pub fn prefix_len(&self, order: usize) -> usize {
        self.degree.partition_point(|&d| d <= order)
    }

    pub fn multi_index(&self, slot: usize) -> &[u8] {
        &self.indices[slot]
    }

    pub fn slot(&self, multi_index: &[u8]) -> Option<usize> {
        self.lookup.get(multi_index).copied()
    }

    pub(crate) fn raise(&self, coord: usize) -> &[usize] {
        &self.raise[coord]
    }

    pub(crate) fn product_table(&self) -> &[(u32, u32, u32, f64)] {
        &self.product
    }

    pub(crate) fn degree_of(&self, slot: usize) -> usize {
        self.degree[slot]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_match_binomial_counts() {
        // C(d + k, k)
        assert_eq!(JetSpace::get(1, 4).len(), 5);
        assert_eq!(JetSpace::get(3, 4).len(), 35);
        assert_eq!(JetSpace::get(5, 4).len(), 126);
        assert_eq!(JetSpace::get(3, 0).len(), 1);
    }

    #[test]
    fn lower_order_is_prefix() {
        let hi = JetSpace::get(3, 4);
        let lo = JetSpace::get(3, 2);
        for s in 0..lo.len() {
            assert_eq!(lo.multi_index(s), hi.multi_index(s));
        }
        assert_eq!(hi.prefix_len(2), lo.len());
    }

    #[test]
    fn raise_table_points_to_successor() {
        let sp = JetSpace::get(2, 3);
        let s = sp.slot(&[1, 1]).unwrap();
        let up = sp.raise(0)[s];
        assert_eq!(sp.multi_index(up), &[2, 1]);
        let top = sp.slot(&[0, 3]).unwrap();
        assert_eq!(sp.raise(1)[top], usize::MAX);
    }
}
