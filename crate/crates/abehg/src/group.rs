//! Pairing-group substrate: scalar field arithmetic, a symmetric-model group
//! wrapper over BLS12-381, hash-to-group, and threshold share polynomials.
//!
//! BLS12-381 is a type-3 (asymmetric) pairing curve, while the encryption
//! construction above this module is written in symmetric notation. The
//! wrapper type [`GroupElementG0`] therefore carries a (G1, G2) coordinate
//! pair: generator-derived values hold the same exponent on both coordinates,
//! and [`pairing`] maps `(a, b)` to `e(a.g1, b.g2)`. Hash outputs are mapped
//! onto each curve independently (hashing to a scalar and exponentiating
//! would publish the discrete log of every attribute element, which breaks
//! the scheme), so the symmetry identity `e(a, b) = e(b, a)` holds on the
//! generator-derived elements the construction pairs both ways.

use ark_bls12_381::{Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, PrimeGroup};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{BigInteger, Field, PrimeField, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

/// Identifier of the compiled pairing group, embedded in every serialized
/// artifact so material from a different curve is rejected instead of
/// silently misused.
pub const GROUP_ID: &str = "bls12-381";

/// Domain separation tag prefix for attribute hashing.
const HASH_DST_G1: &[u8] = b"cpabe:attr:v1:g1";
const HASH_DST_G2: &[u8] = b"cpabe:attr:v1:g2";

pub const SCALAR_BYTES: usize = 32;
pub const G0_BYTES: usize = 48 + 96;
pub const GT_BYTES: usize = 576;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("invalid scalar encoding: {0}")]
    InvalidScalar(String),
    #[error("invalid group element encoding: {0}")]
    InvalidElement(String),
    #[error("lagrange index {0} is not in the index set")]
    IndexNotInSet(u64),
    #[error("lagrange index set contains duplicates")]
    DuplicateIndex,
    #[error("lagrange indices must be nonzero")]
    ZeroIndex,
}

/// Element of the scalar field Z_p of the pairing group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scalar(pub(crate) Fr);

impl Scalar {
    pub fn zero() -> Self {
        Scalar(Fr::zero())
    }

    pub fn one() -> Self {
        Scalar(Fr::from(1u64))
    }

    pub fn from_u64(v: u64) -> Self {
        Scalar(Fr::from(v))
    }

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Scalar(Fr::rand(rng))
    }

    /// Uniform nonzero scalar; rejection-samples the (negligible) zero draw.
    pub fn random_nonzero<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let s = Self::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 + other.0)
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 - other.0)
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        Scalar(self.0 * other.0)
    }

    pub fn neg(&self) -> Scalar {
        Scalar(-self.0)
    }

    pub fn inverse(&self) -> Option<Scalar> {
        self.0.inverse().map(Scalar)
    }

    /// Canonical 32-byte big-endian encoding of the reduced representative.
    pub fn to_bytes(&self) -> [u8; SCALAR_BYTES] {
        let be = self.0.into_bigint().to_bytes_be();
        let mut out = [0u8; SCALAR_BYTES];
        out[SCALAR_BYTES - be.len()..].copy_from_slice(&be);
        out
    }

    /// Strict decode: exactly 32 bytes, value < p.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GroupError> {
        if bytes.len() != SCALAR_BYTES {
            return Err(GroupError::InvalidScalar(format!(
                "expected {SCALAR_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let big = BigUint::from_bytes_be(bytes);
        let repr = <Fr as PrimeField>::BigInt::try_from(big)
            .map_err(|_| GroupError::InvalidScalar("value exceeds field order".into()))?;
        let fr = Fr::from_bigint(repr)
            .ok_or_else(|| GroupError::InvalidScalar("value exceeds field order".into()))?;
        Ok(Scalar(fr))
    }
}

/// Source-group element of the symmetric-model wrapper: a (G1, G2) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupElementG0 {
    pub(crate) g1: G1Projective,
    pub(crate) g2: G2Projective,
}

impl GroupElementG0 {
    /// The fixed generator pair (g1, g2) of the curve.
    pub fn generator() -> Self {
        GroupElementG0 {
            g1: G1Projective::generator(),
            g2: G2Projective::generator(),
        }
    }

    pub fn identity() -> Self {
        GroupElementG0 {
            g1: G1Projective::zero(),
            g2: G2Projective::zero(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.g1.is_zero() && self.g2.is_zero()
    }

    /// Group operation, written multiplicatively to match the construction.
    pub fn mul(&self, other: &GroupElementG0) -> GroupElementG0 {
        GroupElementG0 {
            g1: self.g1 + other.g1,
            g2: self.g2 + other.g2,
        }
    }

    /// Exponentiation by a scalar.
    pub fn pow(&self, exp: &Scalar) -> GroupElementG0 {
        GroupElementG0 {
            g1: self.g1 * exp.0,
            g2: self.g2 * exp.0,
        }
    }

    /// Compressed canonical encoding: G1 coordinate then G2 coordinate.
    pub fn to_bytes(&self) -> [u8; G0_BYTES] {
        let mut out = [0u8; G0_BYTES];
        let mut cur = &mut out[..48];
        self.g1
            .into_affine()
            .serialize_compressed(&mut cur)
            .expect("fixed-size buffer");
        let mut cur = &mut out[48..];
        self.g2
            .into_affine()
            .serialize_compressed(&mut cur)
            .expect("fixed-size buffer");
        out
    }

    /// Strict decode with curve and prime-order subgroup checks.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GroupError> {
        if bytes.len() != G0_BYTES {
            return Err(GroupError::InvalidElement(format!(
                "expected {G0_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let g1 = G1Affine::deserialize_compressed(&bytes[..48])
            .map_err(|e| GroupError::InvalidElement(format!("g1 coordinate: {e}")))?;
        let g2 = G2Affine::deserialize_compressed(&bytes[48..])
            .map_err(|e| GroupError::InvalidElement(format!("g2 coordinate: {e}")))?;
        Ok(GroupElementG0 {
            g1: g1.into(),
            g2: g2.into(),
        })
    }
}

/// Target-group element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupElementGT(pub(crate) PairingOutput<Bls12_381>);

impl GroupElementGT {
    pub fn identity() -> Self {
        GroupElementGT(PairingOutput::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    /// Uniform element of the prime-order target subgroup.
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        GroupElementGT(PairingOutput::rand(rng))
    }

    pub fn mul(&self, other: &GroupElementGT) -> GroupElementGT {
        GroupElementGT(self.0 + other.0)
    }

    /// `self / other`, i.e. multiplication by the inverse.
    pub fn div(&self, other: &GroupElementGT) -> GroupElementGT {
        GroupElementGT(self.0 - other.0)
    }

    pub fn inverse(&self) -> GroupElementGT {
        GroupElementGT(-self.0)
    }

    pub fn pow(&self, exp: &Scalar) -> GroupElementGT {
        GroupElementGT(self.0 * exp.0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(GT_BYTES);
        self.0
            .serialize_compressed(&mut out)
            .expect("in-memory write");
        out
    }

    /// Strict decode with a prime-order subgroup check.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GroupError> {
        if bytes.len() != GT_BYTES {
            return Err(GroupError::InvalidElement(format!(
                "expected {GT_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let v = PairingOutput::deserialize_compressed(bytes)
            .map_err(|e| GroupError::InvalidElement(format!("gt element: {e}")))?;
        Ok(GroupElementGT(v))
    }
}

/// Bilinear map of the symmetric-model wrapper: `e(a, b) = e(a.g1, b.g2)`.
pub fn pairing(a: &GroupElementG0, b: &GroupElementG0) -> GroupElementGT {
    GroupElementGT(Bls12_381::pairing(a.g1, b.g2))
}

type G1Hasher = MapToCurveBasedHasher<
    G1Projective,
    DefaultFieldHasher<Sha256, 128>,
    WBMap<ark_bls12_381::g1::Config>,
>;
type G2Hasher = MapToCurveBasedHasher<
    G2Projective,
    DefaultFieldHasher<Sha256, 128>,
    WBMap<ark_bls12_381::g2::Config>,
>;

/// Deterministic hash of a label into the source group.
///
/// Each coordinate is produced by an independent hash-to-curve so the
/// discrete logarithm of the output stays unknown.
pub fn hash_to_group(label: &[u8]) -> GroupElementG0 {
    let h1 = G1Hasher::new(HASH_DST_G1).expect("static domain tag");
    let h2 = G2Hasher::new(HASH_DST_G2).expect("static domain tag");
    let p1: G1Affine = h1.hash(label).expect("hash-to-curve is total");
    let p2: G2Affine = h2.hash(label).expect("hash-to-curve is total");
    GroupElementG0 {
        g1: p1.into(),
        g2: p2.into(),
    }
}

/// Polynomial over Z_p used to split a secret across the children of a
/// threshold gate; the shared secret sits at the evaluation point 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharePolynomial {
    coefficients: Vec<Scalar>,
}

impl SharePolynomial {
    /// Degree-`degree` polynomial with `poly(0) = secret` and uniformly
    /// random higher coefficients.
    pub fn sample<R: RngCore + CryptoRng>(degree: usize, secret: Scalar, rng: &mut R) -> Self {
        let mut coefficients = Vec::with_capacity(degree + 1);
        coefficients.push(secret);
        for _ in 0..degree {
            coefficients.push(Scalar::random(rng));
        }
        SharePolynomial { coefficients }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[Scalar] {
        &self.coefficients
    }

    /// Horner evaluation at `x`.
    pub fn eval(&self, x: &Scalar) -> Scalar {
        let mut acc = Fr::zero();
        for coeff in self.coefficients.iter().rev() {
            acc = acc * x.0 + coeff.0;
        }
        Scalar(acc)
    }

    /// Share for the 1-based child index `i`, i.e. `poly(i)`.
    pub fn share_at(&self, i: u64) -> Scalar {
        self.eval(&Scalar::from_u64(i))
    }
}

/// Lagrange basis coefficient Δ_{i,S}(x) = Π_{j∈S, j≠i} (x−j)/(i−j).
pub fn lagrange_coeff(i: u64, indices: &[u64], x: &Scalar) -> Result<Scalar, GroupError> {
    if !indices.contains(&i) {
        return Err(GroupError::IndexNotInSet(i));
    }
    if indices.iter().any(|&j| j == 0) {
        return Err(GroupError::ZeroIndex);
    }
    let mut seen = indices.to_vec();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(GroupError::DuplicateIndex);
    }

    let i_fr = Fr::from(i);
    let mut num = Fr::from(1u64);
    let mut den = Fr::from(1u64);
    for &j in indices {
        if j == i {
            continue;
        }
        let j_fr = Fr::from(j);
        num *= x.0 - j_fr;
        den *= i_fr - j_fr;
    }
    let inv = den.inverse().expect("distinct indices give nonzero factors");
    Ok(Scalar(num * inv))
}
