//! Test-design generators and the shared incidence structure.
//!
//! The near-constant tests-per-item (NCTPI) family draws tests uniformly at
//! random *with replacement* for each item, so duplicate draws collapse in
//! the incidence relation while the raw draw count is kept separately in
//! `draw_multiplicity`. Uniform draws use rejection-free modular reduction
//! of one 64-bit stream output per draw, so designs are bit-reproducible
//! from `(spec, stream)`.

use crate::error::{Error, Result};
use crate::rng::{next_below, next_bernoulli, TrialRng};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};

/// Design family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    /// Near-constant tests-per-item: L uniform with-replacement draws per item.
    #[serde(alias = "near-constant-tests-per-item")]
    Nctpi,
    /// Independent (test, item) inclusions with probability q.
    Bernoulli,
    /// One test per item; test i contains exactly item i.
    Identity,
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::Nctpi => "nctpi",
            DesignKind::Bernoulli => "bernoulli",
            DesignKind::Identity => "identity",
        })
    }
}

impl std::str::FromStr for DesignKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nctpi" | "near-constant-tests-per-item" => Ok(DesignKind::Nctpi),
            "bernoulli" => Ok(DesignKind::Bernoulli),
            "identity" => Ok(DesignKind::Identity),
            other => Err(Error::Parse(format!("unknown design kind `{other}`"))),
        }
    }
}

/// Validated generator parameters; exactly the fields of the chosen kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DesignSpec {
    Nctpi { n: usize, t: usize, l: usize },
    Bernoulli { n: usize, t: usize, q: f64 },
    Identity { n: usize },
}

impl DesignSpec {
    pub fn kind(&self) -> DesignKind {
        match self {
            DesignSpec::Nctpi { .. } => DesignKind::Nctpi,
            DesignSpec::Bernoulli { .. } => DesignKind::Bernoulli,
            DesignSpec::Identity { .. } => DesignKind::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DesignSpec::Nctpi { n, t, l } => {
                if n == 0 {
                    return Err(Error::InvalidArgument("n must be positive".into()));
                }
                if t == 0 {
                    return Err(Error::InvalidArgument("T must be at least 1".into()));
                }
                if l == 0 {
                    return Err(Error::InvalidArgument("L must be at least 1".into()));
                }
                Ok(())
            }
            DesignSpec::Bernoulli { n, t, q } => {
                if n == 0 {
                    return Err(Error::InvalidArgument("n must be positive".into()));
                }
                if t == 0 {
                    return Err(Error::InvalidArgument("T must be at least 1".into()));
                }
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidArgument(format!("q = {q} must lie in (0, 1)")));
                }
                Ok(())
            }
            DesignSpec::Identity { n } => {
                if n == 0 {
                    return Err(Error::InvalidArgument("n must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Generates a design from this spec and a stream.
    pub fn generate(&self, rng: &mut TrialRng) -> Result<TestDesign> {
        self.validate()?;
        match *self {
            DesignSpec::Nctpi { n, t, l } => generate_nctpi(n, t, l, rng),
            DesignSpec::Bernoulli { n, t, q } => generate_bernoulli(n, t, q, rng),
            DesignSpec::Identity { n } => Ok(generate_identity(n)),
        }
    }
}

/// A T×n incidence structure stored as both per-item test lists and
/// per-test item lists.
///
/// Both views are sorted, duplicate-free, and always encode the same binary
/// relation. Empty tests and items belonging to no test are permitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestDesign {
    n_items: usize,
    n_tests: usize,
    tests_of_item: Vec<Vec<u32>>,
    items_of_test: Vec<Vec<u32>>,
    draw_multiplicity: Option<Vec<u32>>,
}

impl TestDesign {
    /// Builds a design from per-item test lists. Lists are sorted and
    /// deduplicated; indices are bounds-checked.
    pub fn from_item_lists(
        n_tests: usize,
        mut tests_of_item: Vec<Vec<u32>>,
        draw_multiplicity: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n_items = tests_of_item.len();
        if let Some(d) = &draw_multiplicity {
            if d.len() != n_items {
                return Err(Error::Dimension(format!(
                    "draw_multiplicity has {} entries for {} items",
                    d.len(),
                    n_items
                )));
            }
        }
        for list in &mut tests_of_item {
            list.sort_unstable();
            list.dedup();
            if let Some(&t) = list.last() {
                if t as usize >= n_tests {
                    return Err(Error::Dimension(format!(
                        "test index {t} out of range for T = {n_tests}"
                    )));
                }
            }
        }
        let items_of_test = transpose(n_tests, n_items, &tests_of_item);
        Ok(TestDesign { n_items, n_tests, tests_of_item, items_of_test, draw_multiplicity })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_tests(&self) -> usize {
        self.n_tests
    }

    /// Sorted distinct tests containing `item`.
    pub fn tests_of_item(&self, item: usize) -> &[u32] {
        &self.tests_of_item[item]
    }

    /// Sorted distinct items contained in `test`.
    pub fn items_of_test(&self, test: usize) -> &[u32] {
        &self.items_of_test[test]
    }

    pub fn item_lists(&self) -> &[Vec<u32>] {
        &self.tests_of_item
    }

    pub fn test_lists(&self) -> &[Vec<u32>] {
        &self.items_of_test
    }

    /// Raw with-replacement draw counts per item, when the design came from
    /// a draw-based generator.
    pub fn draw_multiplicity(&self) -> Option<&[u32]> {
        self.draw_multiplicity.as_deref()
    }

    /// Full transposition cross-check: rebuilding each view from the other
    /// must reproduce it exactly.
    pub fn check_consistency(&self) -> Result<()> {
        let rebuilt_items = transpose(self.n_tests, self.n_items, &self.tests_of_item);
        if rebuilt_items != self.items_of_test {
            return Err(Error::Dimension("items_of_test does not match tests_of_item".into()));
        }
        let rebuilt_tests = transpose_rev(self.n_items, &self.items_of_test);
        if rebuilt_tests != self.tests_of_item {
            return Err(Error::Dimension("tests_of_item does not match items_of_test".into()));
        }
        Ok(())
    }

    /// Writes the sparse text format: optional `#` metadata lines, a header
    /// `n T kind`, then one line per item listing its distinct tests.
    pub fn write_text(
        &self,
        w: &mut impl Write,
        kind: DesignKind,
        metadata: Option<&str>,
    ) -> std::io::Result<()> {
        if let Some(meta) = metadata {
            writeln!(w, "# metadata: {meta}")?;
        }
        writeln!(w, "{} {} {}", self.n_items, self.n_tests, kind)?;
        let mut line = String::new();
        for tests in &self.tests_of_item {
            line.clear();
            for (idx, t) in tests.iter().enumerate() {
                if idx > 0 {
                    line.push(' ');
                }
                line.push_str(&t.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Parses the sparse text format. Lines starting with `#` are ignored.
    pub fn read_text(r: impl BufRead) -> Result<(Self, DesignKind)> {
        let mut lines = r.lines();
        let header = loop {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if line.trim_start().starts_with('#') || line.trim().is_empty() {
                        continue;
                    }
                    break line;
                }
                None => return Err(Error::Parse("missing header line".into())),
            }
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("header `{header}` is not `n T kind`")));
        }
        let n: usize =
            fields[0].parse().map_err(|_| Error::Parse(format!("bad item count `{}`", fields[0])))?;
        let t: usize =
            fields[1].parse().map_err(|_| Error::Parse(format!("bad test count `{}`", fields[1])))?;
        let kind: DesignKind = fields[2].parse()?;

        let mut tests_of_item = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            if line.trim_start().starts_with('#') {
                continue;
            }
            if tests_of_item.len() == n {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse("more item lines than items".into()));
            }
            let mut tests = Vec::new();
            for tok in line.split_whitespace() {
                let v: u32 =
                    tok.parse().map_err(|_| Error::Parse(format!("bad test index `{tok}`")))?;
                tests.push(v);
            }
            tests_of_item.push(tests);
        }
        if tests_of_item.len() != n {
            return Err(Error::Parse(format!(
                "expected {n} item lines, found {}",
                tests_of_item.len()
            )));
        }
        let design = TestDesign::from_item_lists(t, tests_of_item, None)?;
        Ok((design, kind))
    }
}

fn transpose(n_tests: usize, _n_items: usize, tests_of_item: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut counts = vec![0usize; n_tests];
    for tests in tests_of_item {
        for &t in tests {
            counts[t as usize] += 1;
        }
    }
    let mut out: Vec<Vec<u32>> = counts.iter().map(|&c| Vec::with_capacity(c)).collect();
    // Item-major fill keeps each per-test list sorted by item index.
    for (i, tests) in tests_of_item.iter().enumerate() {
        for &t in tests {
            out[t as usize].push(i as u32);
        }
    }
    out
}

fn transpose_rev(n_items: usize, items_of_test: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![Vec::new(); n_items];
    for (t, items) in items_of_test.iter().enumerate() {
        for &i in items {
            out[i as usize].push(t as u32);
        }
    }
    out
}

/// Near-constant tests-per-item design: exactly `l` uniform with-replacement
/// draws for every item. Duplicate draws collapse in the incidence relation;
/// `draw_multiplicity` records the raw count `l` for each item.
pub fn generate_nctpi(n: usize, t: usize, l: usize, rng: &mut TrialRng) -> Result<TestDesign> {
    if t == 0 || l == 0 {
        return Err(Error::InvalidArgument(format!("T = {t} and L = {l} must be at least 1")));
    }
    let mut tests_of_item = Vec::with_capacity(n);
    for _ in 0..n {
        let mut tests: Vec<u32> = (0..l).map(|_| next_below(rng, t as u64) as u32).collect();
        tests.sort_unstable();
        tests.dedup();
        tests_of_item.push(tests);
    }
    let design = TestDesign {
        n_items: n,
        n_tests: t,
        items_of_test: transpose(t, n, &tests_of_item),
        tests_of_item,
        draw_multiplicity: Some(vec![l as u32; n]),
    };
    Ok(design)
}

/// Near-constant tests-per-item design at a real-valued draw rate.
///
/// Item i makes floor(rate) or ceil(rate) draws, picked by one Bernoulli
/// draw on the fractional part, so the expected draw count per item is
/// exactly `rate`. This keeps the effective draw coefficient ν = (mean
/// draws)·k/T equal to the configured ν when νT/k is not an integer; with
/// fixed integer rounding the mean of W^(K) lands measurably off (1−e^{−ν})T
/// at desk scale. Consumes 1 + L_i stream outputs per item.
pub fn generate_nctpi_rate(n: usize, t: usize, rate: f64, rng: &mut TrialRng) -> Result<TestDesign> {
    if t == 0 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    if !(rate >= 1.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("draw rate {rate} must be at least 1")));
    }
    let base = rate.floor() as usize;
    let frac = rate - rate.floor();
    let mut tests_of_item = Vec::with_capacity(n);
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let li = base + usize::from(next_bernoulli(rng, frac));
        let mut tests: Vec<u32> = (0..li).map(|_| next_below(rng, t as u64) as u32).collect();
        tests.sort_unstable();
        tests.dedup();
        tests_of_item.push(tests);
        draws.push(li as u32);
    }
    let design = TestDesign {
        n_items: n,
        n_tests: t,
        items_of_test: transpose(t, n, &tests_of_item),
        tests_of_item,
        draw_multiplicity: Some(draws),
    };
    Ok(design)
}

/// Bernoulli design: each (test, item) pair included independently with
/// probability q. Draws are item-major, one stream output per pair.
pub fn generate_bernoulli(n: usize, t: usize, q: f64, rng: &mut TrialRng) -> Result<TestDesign> {
    if t == 0 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("q = {q} must lie in (0, 1)")));
    }
    let mut tests_of_item = Vec::with_capacity(n);
    for _ in 0..n {
        let mut tests = Vec::new();
        for test in 0..t {
            if next_bernoulli(rng, q) {
                tests.push(test as u32);
            }
        }
        tests_of_item.push(tests);
    }
    let design = TestDesign {
        n_items: n,
        n_tests: t,
        items_of_test: transpose(t, n, &tests_of_item),
        tests_of_item,
        draw_multiplicity: None,
    };
    Ok(design)
}

/// Individual-testing design: T = n and test i contains exactly item i.
pub fn generate_identity(n: usize) -> TestDesign {
    let tests_of_item: Vec<Vec<u32>> = (0..n).map(|i| vec![i as u32]).collect();
    TestDesign {
        n_items: n,
        n_tests: n,
        items_of_test: tests_of_item.clone(),
        tests_of_item,
        draw_multiplicity: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    #[test]
    fn nctpi_single_test_absorbs_all_draws() {
        let mut rng = trial_rng(1, 0);
        let d = generate_nctpi(5, 1, 3, &mut rng).unwrap();
        for i in 0..5 {
            assert_eq!(d.tests_of_item(i), &[0]);
        }
        assert_eq!(d.items_of_test(0), &[0, 1, 2, 3, 4]);
        assert_eq!(d.draw_multiplicity(), Some(&[3, 3, 3, 3, 3][..]));
    }

    #[test]
    fn nctpi_coupon_collector_fills_small_design() {
        // One item drawing 10^4 times from 10 tests misses some test with
        // probability at most 10·(9/10)^10000 < 10^-450.
        let mut rng = trial_rng(7, 0);
        let d = generate_nctpi(1, 10, 10_000, &mut rng).unwrap();
        assert_eq!(d.tests_of_item(0).len(), 10);
    }

    #[test]
    fn nctpi_distinct_count_mean_matches_expectation() {
        // E[distinct] = T(1-(1-1/T)^L) = 9.146359655622666 for T=50, L=10.
        let expected = 9.146359655622666;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let trials = 4000usize;
        for i in 0..trials {
            let mut rng = trial_rng(11, i as u64);
            let d = generate_nctpi(1, 50, 10, &mut rng).unwrap();
            let x = d.tests_of_item(0).len() as f64;
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / trials as f64;
        let var = (sumsq - sum * sum / trials as f64) / (trials as f64 - 1.0);
        let se = (var / trials as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn nctpi_distinct_counts_bounded_and_raw_draws_exact() {
        let mut rng = trial_rng(5, 0);
        let (n, t, l) = (200, 23, 4);
        let d = generate_nctpi(n, t, l, &mut rng).unwrap();
        let total: u64 = d.draw_multiplicity().unwrap().iter().map(|&x| x as u64).sum();
        assert_eq!(total, (n * l) as u64);
        for i in 0..n {
            let distinct = d.tests_of_item(i).len();
            assert!((1..=l).contains(&distinct));
        }
    }

    #[test]
    fn nctpi_rate_mixes_floor_and_ceiling() {
        let rate = 5.545177444479562; // nu*T/k for T=2000, k=250, nu=log 2
        let mut rng = trial_rng(3, 9);
        let d = generate_nctpi_rate(20_000, 2000, rate, &mut rng).unwrap();
        let draws = d.draw_multiplicity().unwrap();
        assert!(draws.iter().all(|&x| x == 5 || x == 6));
        let mean = draws.iter().map(|&x| x as f64).sum::<f64>() / draws.len() as f64;
        // sd of the mean is sqrt(0.545*0.455/20000) ≈ 0.0035
        assert!((mean - rate).abs() < 4.0 * 0.0036, "mean draws {mean}");
    }

    #[test]
    fn nctpi_rate_integer_rate_is_constant() {
        let mut rng = trial_rng(3, 10);
        let d = generate_nctpi_rate(100, 17, 4.0, &mut rng).unwrap();
        assert!(d.draw_multiplicity().unwrap().iter().all(|&x| x == 4));
    }

    #[test]
    fn bernoulli_single_cell_frequency() {
        // q = 0.5, n = T = 1: inclusion frequency over 10^4 trials must fall
        // in its own 95% Wilson interval around 0.5 (half-width ≈ 0.0098).
        let trials = 10_000usize;
        let mut hits = 0usize;
        for i in 0..trials {
            let mut rng = trial_rng(19, i as u64);
            let d = generate_bernoulli(1, 1, 0.5, &mut rng).unwrap();
            if d.tests_of_item(0) == [0] {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.015, "freq {freq}");
    }

    #[test]
    fn bernoulli_mean_row_weight() {
        // Row weight is Bin(n, q); mean qn = 20 for n = 200, q = 0.1.
        let (n, t, q) = (200usize, 40usize, 0.1);
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..50 {
            let mut rng = trial_rng(23, i);
            let d = generate_bernoulli(n, t, q, &mut rng).unwrap();
            for test in 0..t {
                sum += d.items_of_test(test).len() as f64;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        // sd per row = sqrt(200*0.1*0.9) ≈ 4.24; se over 2000 rows ≈ 0.095
        assert!((mean - 20.0).abs() < 4.0 * 0.095, "mean row weight {mean}");
    }

    #[test]
    fn bernoulli_rejects_boundary_q_and_zero_t() {
        let mut rng = trial_rng(1, 1);
        assert!(generate_bernoulli(3, 5, 0.0, &mut rng).is_err());
        assert!(generate_bernoulli(3, 5, 1.0, &mut rng).is_err());
        assert!(generate_bernoulli(3, 0, 0.5, &mut rng).is_err());
    }

    #[test]
    fn identity_structure() {
        let d = generate_identity(3);
        assert_eq!(d.n_tests(), 3);
        assert_eq!(d.test_lists(), &[vec![0], vec![1], vec![2]]);
        assert_eq!(d.item_lists(), &[vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn from_item_lists_rejects_out_of_range() {
        assert!(TestDesign::from_item_lists(3, vec![vec![0, 3]], None).is_err());
        assert!(TestDesign::from_item_lists(3, vec![vec![0], vec![2]], Some(vec![1])).is_err());
    }

    #[test]
    fn text_format_round_trip_with_empty_lines() {
        let d = TestDesign::from_item_lists(4, vec![vec![0, 2], vec![], vec![3]], None).unwrap();
        let mut buf = Vec::new();
        d.write_text(&mut buf, DesignKind::Bernoulli, Some("{\"seed\":1}")).unwrap();
        let (parsed, kind) = TestDesign::read_text(&buf[..]).unwrap();
        assert_eq!(kind, DesignKind::Bernoulli);
        assert_eq!(parsed.item_lists(), d.item_lists());
        assert_eq!(parsed.test_lists(), d.test_lists());
    }

    #[test]
    fn text_format_rejects_garbage() {
        assert!(TestDesign::read_text("not a header\n".as_bytes()).is_err());
        assert!(TestDesign::read_text("2 2 nctpi\n0\n".as_bytes()).is_err());
        assert!(TestDesign::read_text("1 2 nosuchkind\n0\n".as_bytes()).is_err());
        assert!(TestDesign::read_text("1 2 nctpi\n5\n".as_bytes()).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_item_lists() -> impl Strategy<Value = (usize, Vec<Vec<u32>>)> {
            (1usize..12).prop_flat_map(|t| {
                (
                    Just(t),
                    proptest::collection::vec(
                        proptest::collection::vec(0..t as u32, 0..8),
                        0..10,
                    ),
                )
            })
        }

        proptest! {
            #[test]
            fn transposition_round_trip((t, lists) in arb_item_lists()) {
                let d = TestDesign::from_item_lists(t, lists, None).unwrap();
                d.check_consistency().unwrap();
            }

            #[test]
            fn text_round_trip((t, lists) in arb_item_lists()) {
                let d = TestDesign::from_item_lists(t, lists, None).unwrap();
                let mut buf = Vec::new();
                d.write_text(&mut buf, DesignKind::Nctpi, None).unwrap();
                let (parsed, _) = TestDesign::read_text(&buf[..]).unwrap();
                prop_assert_eq!(parsed.item_lists(), d.item_lists());
            }
        }
    }
}
