use super::MarkerSet;

/// Maps each reference marker index to a current marker index, or `None`
/// when no current marker lies within the gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correspondence {
    mapping: Vec<Option<usize>>,
}

impl Correspondence {
    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).map(Some).collect(),
        }
    }

    pub fn from_mapping(mapping: Vec<Option<usize>>) -> Self {
        Self { mapping }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn get(&self, reference_idx: usize) -> Option<usize> {
        self.mapping.get(reference_idx).copied().flatten()
    }

    pub fn mapping(&self) -> &[Option<usize>] {
        &self.mapping
    }

    pub fn unmatched(&self) -> impl Iterator<Item = usize> + '_ {
        self.mapping
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.is_none().then_some(i))
    }

    pub fn unmatched_count(&self) -> usize {
        self.unmatched().count()
    }
}

/// Half the median nearest-neighbour spacing of `reference`; infinite when
/// fewer than two markers exist.
pub fn default_gate(reference: &MarkerSet) -> f64 {
    let pts = &reference.positions;
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let mut nn: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            pts.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| p.distance(q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    let mid = nn.len() / 2;
    let median = if nn.len() % 2 == 0 {
        0.5 * (nn[mid - 1] + nn[mid])
    } else {
        nn[mid]
    };
    0.5 * median
}

/// Greedy nearest-neighbour association with gating.
///
/// Candidate pairs within `gate` are taken in ascending distance order (ties
/// by reference index, then current index); each current marker is used at
/// most once. `None` selects [`default_gate`].
pub fn associate_markers(
    reference: &MarkerSet,
    current: &MarkerSet,
    gate: Option<f64>,
) -> Correspondence {
    let gate = gate.unwrap_or_else(|| default_gate(reference));
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in reference.positions.iter().enumerate() {
        for (j, c) in current.positions.iter().enumerate() {
            let d = r.distance(c);
            if d <= gate {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut mapping = vec![None; reference.len()];
    let mut used = vec![false; current.len()];
    for (_, i, j) in pairs {
        if mapping[i].is_none() && !used[j] {
            mapping[i] = Some(j);
            used[j] = true;
        }
    }
    Correspondence { mapping }
}
