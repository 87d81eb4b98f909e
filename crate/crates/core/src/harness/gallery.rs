use serde::{Deserialize, Serialize};

use crate::chain::{ObservableAffine, ReversibleChain};
use crate::error::{Error, Result};
use crate::spectral::spectral_decomposition;

#[derive(Clone, Debug)]
pub struct GalleryEntry {
    pub name: String,
    pub chain: ReversibleChain,
    pub closed_form_tau2: Option<f64>,
    pub notes: String,
}

/// Two states, leave 0 w.p. p and 1 w.p. q; g = (0, 1); τ₂ = 1/(p+q).
pub fn two_state(p: f64, q: f64) -> Result<GalleryEntry> {
    if !(p > 0.0 && p <= 1.0 && q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "two_state needs p, q in (0, 1], got {p}, {q}"
        )));
    }
    let name = format!("two_state_{p}_{q}");
    let chain = ReversibleChain::from_parts(
        vec![vec![1.0 - p, p], vec![q, 1.0 - q]],
        vec![q / (p + q), p / (p + q)],
        vec![0.0, 1.0],
    )?
    .with_name(&name);
    Ok(GalleryEntry {
        name,
        chain,
        closed_form_tau2: Some(1.0 / (p + q)),
        notes: "two-state chain; lambda2 = 1 - p - q".into(),
    })
}

/// Lazy simple random walk on an L-cycle: hold 1/2, step ±1 w.p. 1/4.
/// g indicates the first half of the cycle.
pub fn lazy_cycle(len: usize) -> Result<GalleryEntry> {
    if len < 3 {
        return Err(Error::InvalidConfig(format!("lazy_cycle needs L >= 3, got {len}")));
    }
    let mut kernel = vec![vec![0.0; len]; len];
    for (i, row) in kernel.iter_mut().enumerate() {
        row[i] = 0.5;
        row[(i + 1) % len] += 0.25;
        row[(i + len - 1) % len] += 0.25;
    }
    let observable = (0..len).map(|i| if i < len / 2 { 1.0 } else { 0.0 }).collect();
    let name = format!("lazy_cycle_{len}");
    let chain =
        ReversibleChain::from_parts(kernel, vec![1.0 / len as f64; len], observable)?.with_name(&name);
    let theta = 2.0 * std::f64::consts::PI / len as f64;
    Ok(GalleryEntry {
        name,
        chain,
        closed_form_tau2: Some(2.0 / (1.0 - theta.cos())),
        notes: "lazy walk on a cycle; eigenvalues 1/2 + cos(2 pi j / L)/2".into(),
    })
}

/// Two blocks with a rare crossing. Island 1 has `main` states and mass
/// 1 − 1/n, island 2 (the set A) has `hidden` states and mass 1/n, uniform
/// within each island.
///
/// Proposal: w.p. 1 − ε a uniform state of the current island, w.p. ε a
/// uniform state of the other island. Within-island moves are always
/// accepted (π is flat there); a crossing i → j is accepted w.p.
/// min(1, π_j s_j / (π_i s_i)), where s_i and s_j are the sizes of the
/// islands holding i and j, i.e. the ratio of the two island masses. This is Metropolis–Hastings, so
/// π_i k_ij = π_j k_ji holds by construction.
pub fn two_islands(
    main: usize,
    hidden: usize,
    eps: f64,
    n: u64,
    observable: Vec<f64>,
) -> Result<GalleryEntry> {
    if main == 0 || hidden == 0 || !(eps > 0.0 && eps < 1.0) || n < 2 {
        return Err(Error::InvalidConfig(
            "two_islands needs non-empty islands, eps in (0, 1), n >= 2".into(),
        ));
    }
    let s = main + hidden;
    let hidden_mass = 1.0 / n as f64;
    let island = |i: usize| usize::from(i >= main);
    let sizes = [main as f64, hidden as f64];
    let mass = [(1.0 - hidden_mass) / main as f64, hidden_mass / hidden as f64];
    let mut kernel = vec![vec![0.0; s]; s];
    for (i, row) in kernel.iter_mut().enumerate() {
        let a = island(i);
        for (j, k) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let b = island(j);
            *k = if a == b {
                (1.0 - eps) / sizes[a]
            } else {
                let accept = (mass[b] * sizes[b] / (mass[a] * sizes[a])).min(1.0);
                eps / sizes[b] * accept
            };
        }
        let off: f64 = row.iter().sum();
        row[i] = 1.0 - off;
    }
    let stationary = (0..s).map(|i| mass[island(i)]).collect();
    let name = format!("two_islands_{main}_{hidden}_{eps}_n{n}");
    let chain = ReversibleChain::from_parts(kernel, stationary, observable)?.with_name(&name);
    Ok(GalleryEntry {
        name,
        chain,
        closed_form_tau2: None,
        notes: format!(
            "near-disconnected set of mass 1/{n}; Metropolis crossing with proposal rate {eps}"
        ),
    })
}

fn default_islands(main: usize, hidden: usize, eps: f64, n: u64) -> Result<GalleryEntry> {
    let mut g = vec![0.0; main];
    g.extend(std::iter::repeat_n(1.0, hidden));
    two_islands(main, hidden, eps, n, g)
}

/// Degenerate reducible case: K = I, uniform π, g(i) = i/(s−1).
pub fn identity(s: usize) -> Result<GalleryEntry> {
    if s < 2 {
        return Err(Error::InvalidConfig("identity needs s >= 2".into()));
    }
    let kernel = (0..s)
        .map(|i| (0..s).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let observable = (0..s).map(|i| i as f64 / (s - 1) as f64).collect();
    let name = format!("identity_{s}");
    let chain =
        ReversibleChain::from_parts(kernel, vec![1.0 / s as f64; s], observable)?.with_name(&name);
    Ok(GalleryEntry {
        name,
        chain,
        closed_form_tau2: None,
        notes: "identity kernel; reducible, infinite relaxation time".into(),
    })
}

/// Replaces the observable with the λ₂ eigenfunction rescaled into [0, 1].
/// The sign is fixed so the first non-negligible entry is positive.
pub fn g2_variant(base: GalleryEntry) -> Result<GalleryEntry> {
    let d = spectral_decomposition(&base.chain)?;
    let mut f = d.eigenfunctions[1].clone();
    if let Some(first) = f.iter().find(|v| v.abs() > 1e-9) {
        if *first < 0.0 {
            f.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = 1.0 / (hi - lo);
    let g = f.iter().map(|v| ((v - lo) * scale).clamp(0.0, 1.0)).collect();
    let name = format!("g2_{}", base.name);
    let chain = base
        .chain
        .with_observable(g)?
        .with_name(&name)
        .with_affine(ObservableAffine { shift: lo, scale });
    Ok(GalleryEntry {
        name,
        chain,
        closed_form_tau2: base.closed_form_tau2,
        notes: format!("{}; observable = rescaled second eigenfunction", base.notes),
    })
}

/// The built-in gallery.
pub fn gallery() -> Vec<GalleryEntry> {
    [
        "two_state_0.5_0.5",
        "two_state_0.1_0.1",
        "two_state_0.2_0.3",
        "lazy_cycle_4",
        "lazy_cycle_8",
        "lazy_cycle_16",
        "two_islands_3_1_0.05_n10",
        "g2_two_state_0.1_0.1",
        "g2_lazy_cycle_8",
        "identity_3",
    ]
    .iter()
    .map(|name| resolve_gallery(name).expect("built-in gallery entry"))
    .collect()
}

fn parse<T: std::str::FromStr>(s: &str, whole: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::UnknownGalleryChain(whole.to_string()))
}

/// Resolves a parametric gallery name such as `two_state_0.2_0.3`,
/// `lazy_cycle_8`, `two_islands_3_1_0.05_n10`, `identity_3` or `g2_<name>`.
pub fn resolve_gallery(name: &str) -> Result<GalleryEntry> {
    let unknown = || Error::UnknownGalleryChain(name.to_string());
    if let Some(rest) = name.strip_prefix("g2_") {
        return g2_variant(resolve_gallery(rest)?).map(|mut e| {
            e.name = name.to_string();
            e
        });
    }
    if let Some(rest) = name.strip_prefix("two_state_") {
        let (p, q) = rest.split_once('_').ok_or_else(unknown)?;
        return two_state(parse(p, name)?, parse(q, name)?);
    }
    if let Some(rest) = name.strip_prefix("lazy_cycle_") {
        return lazy_cycle(parse(rest, name)?);
    }
    if let Some(rest) = name.strip_prefix("identity_") {
        return identity(parse(rest, name)?);
    }
    if let Some(rest) = name.strip_prefix("two_islands_") {
        let parts: Vec<&str> = rest.split('_').collect();
        if let [main, hidden, eps, n] = parts.as_slice() {
            let n = n.strip_prefix('n').ok_or_else(unknown)?;
            return default_islands(
                parse(main, name)?,
                parse(hidden, name)?,
                parse(eps, name)?,
                parse(n, name)?,
            );
        }
    }
    Err(unknown())
}

/// `gallery:NAME` or a bare gallery name resolves through the gallery;
/// anything else is read as a chain definition file.
pub fn resolve_chain(source: &str) -> Result<ReversibleChain> {
    if let Some(name) = source.strip_prefix("gallery:") {
        return Ok(resolve_gallery(name)?.chain);
    }
    let path = std::path::Path::new(source);
    if path.exists() {
        return crate::chain::ChainDefinition::load(path)?.into_chain();
    }
    resolve_gallery(source)
        .map(|e| e.chain)
        .map_err(|_| Error::ChainFile(format!("no such file or gallery chain: {source}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasDemoReport {
    pub chain_name: String,
    pub n: u64,
    pub island_mass: f64,
    pub gbar: f64,
    /// Σ_{i ∉ A} π_i g(i): what a sampler that never enters A can see.
    pub visible_mean: f64,
    /// E_π[g·1_A] = ḡ − visible_mean.
    pub invisible_contribution: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// Quantifies the mass of ḡ hidden in a near-disconnected set of
/// π-mass 1/n. `main_g` and `island_g` give g on each island.
pub fn near_disconnected_bias_demo(
    n: u64,
    main_g: &[f64],
    island_g: &[f64],
    eps: f64,
) -> Result<BiasDemoReport> {
    let mut g = main_g.to_vec();
    g.extend_from_slice(island_g);
    let entry = two_islands(main_g.len(), island_g.len(), eps, n, g)?;
    let chain = &entry.chain;
    let pi = chain.stationary().weights();
    let split = main_g.len();
    let gbar = chain.gbar();
    let visible_mean: f64 = (0..split).map(|i| pi[i] * chain.observable()[i]).sum();
    let invisible: f64 = (split..pi.len()).map(|i| pi[i] * chain.observable()[i]).sum();
    let island_mass: f64 = pi[split..].iter().sum();
    let bound = 1.0 / n as f64;
    Ok(BiasDemoReport {
        chain_name: entry.name,
        n,
        island_mass,
        gbar,
        visible_mean,
        invisible_contribution: invisible,
        bound,
        within_bound: invisible <= bound * (1.0 + 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{spectral_summary, RelaxationTime};
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms_match_spectra() {
        for entry in gallery() {
            let s = spectral_summary(&entry.chain).unwrap();
            if let Some(tau) = entry.closed_form_tau2 {
                let got = s.tau2().unwrap();
                assert!(
                    ((got - tau) / tau).abs() <= 1e-8,
                    "{}: {got} vs {tau}",
                    entry.name
                );
            }
        }
    }

    #[test]
    fn named_examples() {
        let e = resolve_gallery("two_state_0.1_0.1").unwrap();
        assert_relative_eq!(e.closed_form_tau2.unwrap(), 5.0, max_relative = 1e-12);
        let e = resolve_gallery("lazy_cycle_8").unwrap();
        assert_relative_eq!(e.closed_form_tau2.unwrap(), 6.828427124746192, max_relative = 1e-12);
        let e = resolve_gallery("identity_3").unwrap();
        assert_eq!(
            spectral_summary(&e.chain).unwrap().relaxation_time,
            RelaxationTime::Infinite
        );
        assert!(resolve_gallery("nonsense").is_err());
        assert!(resolve_gallery("two_state_x_0.1").is_err());
    }

    #[test]
    fn islands_hidden_mass() {
        let e = resolve_gallery("two_islands_3_1_0.05_n10").unwrap();
        let pi = e.chain.stationary().weights();
        assert_relative_eq!(pi[3], 0.1, max_relative = 1e-14);
        assert_relative_eq!(e.chain.gbar(), 0.1, max_relative = 1e-14);
    }

    #[test]
    fn g2_observable_is_eigenfunction() {
        let e = resolve_gallery("g2_lazy_cycle_8").unwrap();
        let chain = &e.chain;
        let affine = chain.affine().unwrap();
        let lambda2 = spectral_summary(chain).unwrap().lambda2;
        // raw f = g/scale + shift satisfies K f = λ₂ f
        let f: Vec<f64> = chain
            .observable()
            .iter()
            .map(|g| g / affine.scale + affine.shift)
            .collect();
        for i in 0..8 {
            let kf: f64 = (0..8).map(|j| chain.kernel().get(i, j) * f[j]).sum();
            assert!((kf - lambda2 * f[i]).abs() < 1e-10);
        }
        let lo = chain.observable().iter().copied().fold(1.0, f64::min);
        let hi = chain.observable().iter().copied().fold(0.0, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn bias_demo_examples() {
        let zero = near_disconnected_bias_demo(20, &[0.3, 0.6, 0.9], &[0.0], 0.01).unwrap();
        assert_eq!(zero.invisible_contribution, 0.0);
        let full = near_disconnected_bias_demo(20, &[0.3, 0.6, 0.9], &[1.0, 1.0], 0.01).unwrap();
        assert_relative_eq!(full.invisible_contribution, 1.0 / 20.0, max_relative = 1e-12);
        assert!(full.within_bound);
        let mixed = near_disconnected_bias_demo(8, &[0.5, 0.5], &[0.2, 0.9, 0.4], 0.02).unwrap();
        let direct = (0.2 + 0.9 + 0.4) * (1.0 / 8.0) / 3.0;
        assert_relative_eq!(mixed.invisible_contribution, direct, max_relative = 1e-12);
        assert_relative_eq!(
            mixed.gbar,
            mixed.visible_mean + mixed.invisible_contribution,
            max_relative = 1e-12
        );
    }
}
