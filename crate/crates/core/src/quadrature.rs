//! Symmetric triangle quadrature.

/// Degree-4, six-point Dunavant rule: `(barycentric coordinates, weight)`,
/// weights normalized to sum to one.
pub const DUNAVANT4: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445948490915965;
    const B1: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223381589678011;
    const A2: f64 = 0.091576213509771;
    const B2: f64 = 1.0 - 2.0 * A2;
    const W2: f64 = 0.109951743655322;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};
