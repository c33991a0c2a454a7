//! Exact spectrum of the linearised operator on the eigenvalue lattice.
//!
//! A Fourier mode `e_l exp(i(jt + ks))` of the rescaled perturbation has
//! eigenvalue
//!
//! ```text
//! λ(j, k, l) = (ν j)^2 - k^4 + (-1)^l a^-2 k^2,   ν = p / q.
//! ```
//!
//! Everything here is exact: rationals are `BigRational`, kernel membership
//! is equality with zero, and no floating point is involved. Resonance is
//! therefore certified exactly, but only inside a finite [`Cutoff`] box.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fourier::SymmetryClass;
use crate::par;

/// Frequency ν = p/q with `gcd(p, q) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RationalFrequency {
    p: u64,
    q: u64,
}

impl RationalFrequency {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidFrequency { p, q, reason: "p and q must be positive" });
        }
        if p.gcd(&q) != 1 {
            return Err(Error::InvalidFrequency { p, q, reason: "p and q must be coprime" });
        }
        Ok(Self { p, q })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn ratio(&self) -> BigRational {
        BigRational::new(BigInt::from(self.p), BigInt::from(self.q))
    }

    pub fn to_f64(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

impl fmt::Display for RationalFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

/// Lattice site `(j, k, l)`: time mode, space mode, component (0 = x, 1 = y).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LatticeSite {
    pub j: i64,
    pub k: i64,
    pub l: u8,
}

impl LatticeSite {
    pub const fn new(j: i64, k: i64, l: u8) -> Self {
        Self { j, k, l }
    }

    // Tie-break order for argmin/witness reporting: small |j|, then small |k|,
    // then l, then non-negative representatives first.
    fn order_key(&self) -> (u64, u64, u8, bool, bool) {
        (self.j.unsigned_abs(), self.k.unsigned_abs(), self.l, self.j < 0, self.k < 0)
    }
}

impl fmt::Display for LatticeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.j, self.k, self.l)
    }
}

/// Box `|j| <= j_max`, `|k| <= k_max` in which spectral statements are certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Cutoff {
    pub j_max: u64,
    pub k_max: u64,
}

impl Cutoff {
    pub fn new(j_max: u64, k_max: u64) -> Result<Self> {
        if j_max == 0 || k_max == 0 {
            return Err(Error::InvalidConfig("cutoff components must be at least 1".into()));
        }
        Ok(Self { j_max, k_max })
    }

    fn sites(&self) -> impl Iterator<Item = LatticeSite> + '_ {
        let (jm, km) = (self.j_max as i64, self.k_max as i64);
        (-km..=km).flat_map(move |k| {
            (-jm..=jm).flat_map(move |j| (0..2u8).map(move |l| LatticeSite::new(j, k, l)))
        })
        .filter(|s| s.j != 0 || s.k != 0)
    }
}

impl Default for Cutoff {
    fn default() -> Self {
        Self { j_max: 64, k_max: 32 }
    }
}

impl FromStr for Cutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['x', 'X', ','])
            .ok_or_else(|| Error::Parse(format!("cutoff `{s}` is not of the form JxK")))?;
        let j = a.trim().parse().map_err(|_| Error::Parse(format!("bad cutoff `{s}`")))?;
        let k = b.trim().parse().map_err(|_| Error::Parse(format!("bad cutoff `{s}`")))?;
        Cutoff::new(j, k)
    }
}

fn sign(l: u8) -> i64 {
    if l % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Exact eigenvalue `λ(j,k,l) = (νj)^2 - k^4 + (-1)^l a^-2 k^2`.
pub fn eigenvalue(site: LatticeSite, freq: RationalFrequency, a2inv: &BigRational) -> BigRational {
    let nu_j = freq.ratio() * BigInt::from(site.j);
    let k2 = BigRational::from_integer(BigInt::from(site.k) * BigInt::from(site.k));
    let quartic = &k2 * &k2;
    let shift = a2inv * &k2 * BigInt::from(sign(site.l));
    &nu_j * &nu_j - quartic + shift
}

/// Distance parameter `a0^-2 = (-1)^l0 (k0^2 - (p j0 / (q k0))^2)` that puts
/// `(±j0, ±k0, l0)` in the kernel.
pub fn amplitude_from_site(freq: RationalFrequency, j0: u64, k0: u64, l0: u8) -> Result<BigRational> {
    if j0 == 0 || k0 == 0 || l0 > 1 {
        return Err(Error::InvalidConfig(format!("site ({j0},{k0},{l0}) is not in N x N x Z2")));
    }
    let k0r = BigRational::from_integer(BigInt::from(k0));
    let ratio = BigRational::new(BigInt::from(freq.p()) * BigInt::from(j0), BigInt::from(freq.q()) * BigInt::from(k0));
    let value = (&k0r * &k0r - &ratio * &ratio) * BigInt::from(sign(l0));
    if value.is_positive() {
        Ok(value)
    } else {
        Err(Error::NonPositiveAmplitude { value: fmt_rational(&value) })
    }
}

/// All sites in the cutoff box with exactly vanishing eigenvalue, sorted.
///
/// For each `(k, l)` the equation `λ = 0` is solved for `j^2` and accepted
/// only when that is a perfect square, so the scan is linear in `k_max`.
pub fn kernel_set(freq: RationalFrequency, a2inv: &BigRational, cutoff: Cutoff) -> Vec<LatticeSite> {
    let km = cutoff.k_max as i64;
    let mut out = Vec::new();
    for k in -km..=km {
        if k == 0 {
            // λ = (νj)^2 vanishes only at the excluded origin.
            continue;
        }
        for l in 0..2u8 {
            if let Some(j) = kernel_j(freq, a2inv, k, l) {
                if j.unsigned_abs() <= cutoff.j_max {
                    out.push(LatticeSite::new(j, k, l));
                    if j != 0 {
                        out.push(LatticeSite::new(-j, k, l));
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// Non-negative `j` with `λ(j,k,l) = 0`, if one exists.
fn kernel_j(freq: RationalFrequency, a2inv: &BigRational, k: i64, l: u8) -> Option<i64> {
    // j^2 = (k^4 ad - s an k^2) q^2 / (ad p^2) with a2inv = an/ad.
    let (an, ad) = (a2inv.numer(), a2inv.denom());
    if let (Some(an), Some(ad)) = (an.to_i128(), ad.to_i128()) {
        if let Some(j) = kernel_j_small(freq, an, ad, k, l) {
            return j;
        }
    }
    let k2 = BigInt::from(k) * BigInt::from(k);
    let q2 = BigInt::from(freq.q()).pow(2);
    let p2 = BigInt::from(freq.p()).pow(2);
    let num = (&k2 * &k2 * ad - an * &k2 * BigInt::from(sign(l))) * q2;
    let den = ad * p2;
    if num.is_negative() || !num.is_multiple_of(&den) {
        return None;
    }
    let j2 = num / den;
    let j = j2.sqrt();
    (&j * &j == j2).then(|| j.to_i64()).flatten()
}

// i128 fast path; the outer `None` means overflow, fall back to BigInt.
fn kernel_j_small(freq: RationalFrequency, an: i128, ad: i128, k: i64, l: u8) -> Option<Option<i64>> {
    let k2 = (k as i128).checked_mul(k as i128)?;
    let q2 = (freq.q() as i128).checked_mul(freq.q() as i128)?;
    let p2 = (freq.p() as i128).checked_mul(freq.p() as i128)?;
    let quart = k2.checked_mul(k2)?.checked_mul(ad)?;
    let mixed = an.checked_mul(k2)?.checked_mul(sign(l) as i128)?;
    let num = quart.checked_sub(mixed)?.checked_mul(q2)?;
    let den = ad.checked_mul(p2)?;
    if num < 0 || num % den != 0 {
        return Some(None);
    }
    let j2 = num / den;
    let j = j2.sqrt();
    Some((j * j == j2).then(|| i64::try_from(j).ok()).flatten())
}

/// Non-resonance test: the only kernel sites in `j0 Z × k0 Z × Z2` are the
/// seeded `(±j0, ±k0, l0)`. Certified within `cutoff` only. On failure the
/// smallest offending site is returned as witness.
pub fn is_nonresonant(
    freq: RationalFrequency,
    j0: u64,
    k0: u64,
    l0: u8,
    cutoff: Cutoff,
) -> Result<(bool, Option<LatticeSite>)> {
    let a2inv = amplitude_from_site(freq, j0, k0, l0)?;
    let kernel = kernel_set(freq, &a2inv, cutoff);
    Ok(resonance_witness(&kernel, j0, k0, l0))
}

fn resonance_witness(kernel: &[LatticeSite], j0: u64, k0: u64, l0: u8) -> (bool, Option<LatticeSite>) {
    let (j0, k0) = (j0 as i64, k0 as i64);
    let witness = kernel
        .iter()
        .filter(|s| s.j % j0 == 0 && s.k % k0 == 0)
        .filter(|s| !(s.j.abs() == j0 && s.k.abs() == k0 && s.l == l0))
        .min_by_key(|s| s.order_key())
        .copied();
    (witness.is_none(), witness)
}

/// The interval condition `(q^2k^2 - q)k^2 < p^2 j^2 < (q^2k^2 + q)k^2`.
/// Recorded per candidate; it only holds on the parabola-adjacent sites with
/// `p j = q k^2`, which carry no positive amplitude.
pub fn condition_con(freq: RationalFrequency, j: u64, k: u64) -> bool {
    let (p, q) = (BigInt::from(freq.p()), BigInt::from(freq.q()));
    let (j, k) = (BigInt::from(j), BigInt::from(k));
    let k2 = &k * &k;
    let mid = &p * &p * &j * &j;
    let lo = (&q * &q * &k2 - &q) * &k2;
    let hi = (&q * &q * &k2 + &q) * &k2;
    lo < mid && mid < hi
}

/// A seeded kernel site together with its exact amplitude and kernel set.
#[derive(Clone, Debug, Serialize)]
pub struct BifurcationSite {
    pub freq: RationalFrequency,
    pub j0: u64,
    pub k0: u64,
    pub l0: u8,
    #[serde(serialize_with = "ser_rational")]
    pub a2inv: BigRational,
    pub kernel: Vec<LatticeSite>,
    pub nonresonant: bool,
    pub witness: Option<LatticeSite>,
    pub cutoff: Cutoff,
    pub condition_con: bool,
}

impl BifurcationSite {
    pub fn new(freq: RationalFrequency, j0: u64, k0: u64, l0: u8, cutoff: Cutoff) -> Result<Self> {
        if cutoff.j_max < j0 || cutoff.k_max < k0 {
            return Err(Error::InvalidConfig(format!(
                "cutoff {}x{} does not contain the seed ({j0},{k0})",
                cutoff.j_max, cutoff.k_max
            )));
        }
        let a2inv = amplitude_from_site(freq, j0, k0, l0)?;
        let kernel = kernel_set(freq, &a2inv, cutoff);
        let (nonresonant, witness) = resonance_witness(&kernel, j0, k0, l0);
        Ok(Self {
            freq,
            j0,
            k0,
            l0,
            condition_con: condition_con(freq, j0, k0),
            a2inv,
            kernel,
            nonresonant,
            witness,
            cutoff,
        })
    }

    /// Straight-pair distance `a0`.
    pub fn a0(&self) -> f64 {
        self.a2inv_f64().powf(-0.5)
    }

    pub fn a2inv_f64(&self) -> f64 {
        rational_to_f64(&self.a2inv)
    }

    /// Minimal period `2π q / p` of the bifurcating standing waves.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq.q() as f64 / self.freq.p() as f64
    }

    /// `period / 2π = q / p`, exactly.
    pub fn period_over_two_pi(&self) -> BigRational {
        BigRational::new(BigInt::from(self.freq.q()), BigInt::from(self.freq.p()))
    }

    pub fn seed(&self) -> LatticeSite {
        LatticeSite::new(self.j0 as i64, self.k0 as i64, self.l0)
    }

    /// Isotropy class of the standing waves seeded here.
    pub fn standing_symmetry(&self) -> SymmetryClass {
        SymmetryClass::standing(self.j0 as usize, self.k0 as usize, self.l0)
    }

    pub fn gap_report(&self) -> GapReport {
        gap_report(self.freq, &self.a2inv, &self.kernel, self.cutoff)
    }
}

/// Candidate atlas: every `(p, k0, l0)` with `p <= p_max` coprime to `q`,
/// `k0 <= k_max` and `j0 = 1` whose amplitude is positive, sorted by `a2inv`.
pub fn enumerate_candidates(q: u64, k_max: u64, p_max: u64, cutoff: Cutoff) -> Vec<BifurcationSite> {
    let pairs: Vec<(u64, u64)> = (1..=k_max)
        .flat_map(|k0| (1..=p_max).map(move |p| (k0, p)))
        .filter(|&(_, p)| p.gcd(&q) == 1)
        .collect();
    let mut out: Vec<BifurcationSite> = par::map_slice(&pairs, |&(k0, p)| {
        let Ok(freq) = RationalFrequency::new(p, q) else {
            return Vec::new();
        };
        (0..2u8)
            .filter_map(|l0| BifurcationSite::new(freq, 1, k0, l0, cutoff).ok())
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    out.sort_by(|a, b| {
        a.a2inv
            .cmp(&b.a2inv)
            .then(a.k0.cmp(&b.k0))
            .then(a.freq.p().cmp(&b.freq.p()))
            .then(a.l0.cmp(&b.l0))
    });
    out
}

/// Exact spectral-gap diagnostics over the non-kernel part of the cutoff box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    #[serde(serialize_with = "ser_rational")]
    pub min_abs_lambda: BigRational,
    pub argmin_site: LatticeSite,
    /// Computed gap constant: min of `|λ| / (k^2 + |j|)`.
    #[serde(serialize_with = "ser_rational")]
    pub min_ratio: BigRational,
    pub argmin_ratio_site: LatticeSite,
    /// Least common denominator of every eigenvalue in the box.
    #[serde(serialize_with = "ser_bigint")]
    pub denominator_bound: BigInt,
}

struct Partial {
    min_abs: Option<(BigInt, LatticeSite)>,
    min_ratio: Option<(BigInt, BigInt, LatticeSite)>,
    lcd: BigInt,
}

fn better(candidate: &LatticeSite, incumbent: &LatticeSite) -> bool {
    candidate.order_key() < incumbent.order_key()
}

pub fn gap_report(
    freq: RationalFrequency,
    a2inv: &BigRational,
    kernel: &[LatticeSite],
    cutoff: Cutoff,
) -> GapReport {
    let kernel: HashSet<LatticeSite> = kernel.iter().copied().collect();
    // Common denominator D; every λ is N / D with integer N.
    let q2 = BigInt::from(freq.q()).pow(2);
    let p2 = BigInt::from(freq.p()).pow(2);
    let (an, ad) = (a2inv.numer().clone(), a2inv.denom().clone());
    let d = q2.lcm(&ad);
    let (dq, da) = (&d / &q2, &d / &ad);
    let km = cutoff.k_max as i64;
    let jm = cutoff.j_max as i64;

    let partials = par::map_range((2 * km + 1) as usize, |ik| {
        let k = ik as i64 - km;
        let k2 = BigInt::from(k * k);
        let mut part = Partial { min_abs: None, min_ratio: None, lcd: BigInt::one() };
        for j in -jm..=jm {
            if j == 0 && k == 0 {
                continue;
            }
            let base = &p2 * BigInt::from(j * j) * &dq - &k2 * &k2 * &d;
            let mixed = &an * &da * &k2;
            for l in 0..2u8 {
                let site = LatticeSite::new(j, k, l);
                let n = if l == 0 { &base + &mixed } else { &base - &mixed };
                let g = n.gcd(&d);
                part.lcd = part.lcd.lcm(&(&d / &g));
                if kernel.contains(&site) || n.is_zero() {
                    continue;
                }
                let abs = n.abs();
                let take = match &part.min_abs {
                    None => true,
                    Some((m, s)) => abs < *m || (abs == *m && better(&site, s)),
                };
                if take {
                    part.min_abs = Some((abs.clone(), site));
                }
                let w = BigInt::from(k * k + j.abs());
                let take = match &part.min_ratio {
                    None => true,
                    Some((m, mw, s)) => {
                        let lhs = &abs * mw;
                        let rhs = m * &w;
                        lhs < rhs || (lhs == rhs && better(&site, s))
                    }
                };
                if take {
                    part.min_ratio = Some((abs, w, site));
                }
            }
        }
        part
    });

    let mut min_abs: Option<(BigInt, LatticeSite)> = None;
    let mut min_ratio: Option<(BigInt, BigInt, LatticeSite)> = None;
    let mut lcd = BigInt::one();
    for part in partials {
        lcd = lcd.lcm(&part.lcd);
        if let Some((m, s)) = part.min_abs {
            let take = match &min_abs {
                None => true,
                Some((cm, cs)) => m < *cm || (m == *cm && better(&s, cs)),
            };
            if take {
                min_abs = Some((m, s));
            }
        }
        if let Some((m, w, s)) = part.min_ratio {
            let take = match &min_ratio {
                None => true,
                Some((cm, cw, cs)) => {
                    let lhs = &m * cw;
                    let rhs = cm * &w;
                    lhs < rhs || (lhs == rhs && better(&s, cs))
                }
            };
            if take {
                min_ratio = Some((m, w, s));
            }
        }
    }
    // (0, 1, 1) has λ = -1 - a^-2 < 0, so the box always has a non-kernel site.
    let (m, site) = min_abs.expect("cutoff box contains non-kernel sites");
    let (rm, rw, rsite) = min_ratio.expect("cutoff box contains non-kernel sites");
    GapReport {
        min_abs_lambda: BigRational::new(m, d.clone()),
        argmin_site: site,
        min_ratio: BigRational::new(rm, d * rw),
        argmin_ratio_site: rsite,
        denominator_bound: lcd,
    }
}

/// Every site of the cutoff box with its exact eigenvalue, in scan order.
pub fn eigenvalue_table(
    freq: RationalFrequency,
    a2inv: &BigRational,
    cutoff: Cutoff,
) -> Vec<(LatticeSite, BigRational)> {
    let sites: Vec<LatticeSite> = cutoff.sites().collect();
    par::map_slice(&sites, |&s| (s, eigenvalue(s, freq, a2inv)))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `n/d` form, used for every exact quantity written out (integers get `/1`).
pub fn fmt_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("`{s}` is not a rational of the form n/d"));
    let (n, d) = match s.trim().split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

pub(crate) fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rational(r))
}

fn ser_bigint<S: Serializer>(n: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&n.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn nu(p: u64, q: u64) -> RationalFrequency {
        RationalFrequency::new(p, q).unwrap()
    }

    fn big_cutoff() -> Cutoff {
        Cutoff::new(64, 32).unwrap()
    }

    // Brute-force oracle: scan every site and test λ == 0 with `eigenvalue`.
    fn kernel_by_scan(freq: RationalFrequency, a2inv: &BigRational, cutoff: Cutoff) -> Vec<LatticeSite> {
        let mut v: Vec<_> = cutoff.sites().filter(|&s| eigenvalue(s, freq, a2inv).is_zero()).collect();
        v.sort();
        v
    }

    fn quad(j: i64, k: i64, l: u8) -> Vec<LatticeSite> {
        let mut v = vec![
            LatticeSite::new(j, k, l),
            LatticeSite::new(-j, k, l),
            LatticeSite::new(j, -k, l),
            LatticeSite::new(-j, -k, l),
        ];
        v.sort();
        v
    }

    #[test]
    fn frequency_validation() {
        assert!(RationalFrequency::new(0, 2).is_err());
        assert!(RationalFrequency::new(1, 0).is_err());
        assert!(RationalFrequency::new(2, 4).is_err());
        assert_eq!(nu(3, 2).to_string(), "3/2");
    }

    #[test]
    fn eigenvalue_examples() {
        let a = r(3, 4);
        assert_eq!(eigenvalue(LatticeSite::new(1, 1, 0), nu(1, 2), &a), r(0, 1));
        assert_eq!(eigenvalue(LatticeSite::new(3, 1, 0), nu(1, 2), &a), r(2, 1));
        assert_eq!(eigenvalue(LatticeSite::new(0, 2, 0), nu(1, 2), &a), r(-13, 1));
    }

    #[test]
    fn amplitude_examples() {
        assert_eq!(amplitude_from_site(nu(1, 2), 1, 1, 0).unwrap(), r(3, 4));
        assert_eq!(amplitude_from_site(nu(3, 2), 1, 1, 1).unwrap(), r(5, 4));
        assert!(matches!(
            amplitude_from_site(nu(1, 1), 1, 1, 0),
            Err(Error::NonPositiveAmplitude { .. })
        ));
    }

    #[test]
    fn kernel_examples() {
        let c = big_cutoff();
        assert_eq!(kernel_set(nu(1, 2), &r(3, 4), c), quad(1, 1, 0));
        assert!(kernel_set(nu(1, 2), &r(1, 3), c).is_empty());
        let mut expect = quad(1, 1, 1);
        expect.extend(quad(1, 2, 0));
        expect.sort();
        assert_eq!(kernel_set(nu(2, 1), &r(3, 1), c), expect);
    }

    #[test]
    fn kernel_matches_exhaustive_scan() {
        let c = Cutoff::new(40, 12).unwrap();
        for (p, q, a) in [(1, 2, r(3, 4)), (2, 1, r(3, 1)), (3, 2, r(5, 4)), (1, 1, r(1, 1)), (7, 3, r(2, 9))] {
            assert_eq!(kernel_set(nu(p, q), &a, c), kernel_by_scan(nu(p, q), &a, c), "p={p} q={q}");
        }
    }

    #[test]
    fn resonance_examples() {
        let c = big_cutoff();
        assert_eq!(is_nonresonant(nu(1, 2), 1, 1, 0, c).unwrap(), (true, None));
        assert_eq!(
            is_nonresonant(nu(2, 1), 1, 1, 1, c).unwrap(),
            (false, Some(LatticeSite::new(1, 2, 0)))
        );
        assert_eq!(is_nonresonant(nu(3, 2), 1, 1, 1, c).unwrap(), (true, None));
        assert!(is_nonresonant(nu(1, 1), 1, 1, 0, c).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let c = big_cutoff();
        let small = enumerate_candidates(2, 1, 4, c);
        let find = |list: &[BifurcationSite], a: BigRational| list.iter().find(|s| s.a2inv == a).cloned();
        let a = find(&small, r(3, 4)).unwrap();
        assert_eq!((a.freq.p(), a.l0, a.nonresonant), (1, 0, true));
        let b = find(&small, r(5, 4)).unwrap();
        assert_eq!((b.freq.p(), b.l0, b.nonresonant), (3, 1, true));
        assert!(small.windows(2).all(|w| w[0].a2inv <= w[1].a2inv));

        let wider = enumerate_candidates(2, 2, 8, c);
        let e = find(&wider, r(15, 16)).unwrap();
        assert_eq!((e.freq.p(), e.k0, e.l0), (7, 2, 0));
        assert!((e.period() - 2.0 * std::f64::consts::PI * 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(e.period_over_two_pi(), r(2, 7));

        assert!(enumerate_candidates(1, 1, 1, c).is_empty());
    }

    #[test]
    fn gap_report_instance_a() {
        let c = big_cutoff();
        let site = BifurcationSite::new(nu(1, 2), 1, 1, 0, c).unwrap();
        let g = site.gap_report();
        assert_eq!(g.min_abs_lambda, r(1, 4));
        assert_eq!(g.argmin_site, LatticeSite::new(0, 1, 0));
        assert_eq!(g.min_ratio, r(3, 44));
        assert_eq!(g.argmin_ratio_site, LatticeSite::new(7, 2, 0));
        assert!(BigInt::from(4).is_multiple_of(&g.denominator_bound));
    }

    #[test]
    fn gap_report_matches_rational_scan() {
        let c = Cutoff::new(20, 8).unwrap();
        let freq = nu(3, 2);
        let a2inv = r(5, 4);
        let kernel = kernel_set(freq, &a2inv, c);
        let g = gap_report(freq, &a2inv, &kernel, c);
        let mut best: Option<BigRational> = None;
        let mut best_ratio: Option<BigRational> = None;
        for s in c.sites().filter(|s| !kernel.contains(s)) {
            let lam = eigenvalue(s, freq, &a2inv).abs();
            let ratio = &lam / BigInt::from(s.k * s.k + s.j.abs());
            best = Some(best.map_or(lam.clone(), |b| b.min(lam)));
            best_ratio = Some(best_ratio.map_or(ratio.clone(), |b| b.min(ratio)));
        }
        assert_eq!(Some(g.min_abs_lambda), best);
        assert_eq!(Some(g.min_ratio), best_ratio);
    }

    #[test]
    fn rational_text_form() {
        assert_eq!(fmt_rational(&r(2, 1)), "2/1");
        assert_eq!(fmt_rational(&r(-3, 12)), "-1/4");
        assert_eq!(parse_rational("3/4").unwrap(), r(3, 4));
        assert_eq!(parse_rational(" 5 ").unwrap(), r(5, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert_eq!("64x32".parse::<Cutoff>().unwrap(), Cutoff::new(64, 32).unwrap());
        assert!("64".parse::<Cutoff>().is_err());
    }
}
