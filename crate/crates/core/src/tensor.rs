//! Small fixed-size tensors on R³ with canonical symmetric storage.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Storage slot of the symmetric pair (i, j), for any order of the indices.
pub const SYM2: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

/// Storage slot of the totally symmetric triple (i, j, k), for any permutation.
pub const SYM3: [[[usize; 3]; 3]; 3] = [
    [[0, 1, 2], [1, 3, 4], [2, 4, 5]],
    [[1, 3, 4], [3, 6, 7], [4, 7, 8]],
    [[2, 4, 5], [4, 7, 8], [5, 8, 9]],
];

/// Index pairs (i ≤ j) in storage order.
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Index triples (i ≤ j ≤ k) in storage order.
pub const TRIPLES: [(usize, usize, usize); 10] = [
    (0, 0, 0),
    (0, 0, 1),
    (0, 0, 2),
    (0, 1, 1),
    (0, 1, 2),
    (0, 2, 2),
    (1, 1, 1),
    (1, 1, 2),
    (1, 2, 2),
    (2, 2, 2),
];

/// Symmetric 3×3 matrix stored as its six independent entries.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymMat3(pub [f64; 6]);

impl SymMat3 {
    pub const ZERO: SymMat3 = SymMat3([0.0; 6]);

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[SYM2[i][j]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[SYM2[i][j]] = v;
    }

    /// Packs the upper triangle of a full matrix.
    pub fn from_full(m: &Mat3) -> Self {
        let mut s = [0.0; 6];
        for (slot, &(i, j)) in PAIRS.iter().enumerate() {
            s[slot] = m[i][j];
        }
        SymMat3(s)
    }

    pub fn to_full(&self) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3] + self.0[5]
    }

    pub fn frob_sq(&self) -> f64 {
        let m = self.to_full();
        frob_sq(&m)
    }
}

/// Totally symmetric 3-tensor stored as its ten independent entries.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor3(pub [f64; 10]);

impl SymTensor3 {
    pub const ZERO: SymTensor3 = SymTensor3([0.0; 10]);

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.0[SYM3[i][j][k]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.0[SYM3[i][j][k]] = v;
    }

    pub fn to_full(&self) -> [[[f64; 3]; 3]; 3] {
        let mut t = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    t[i][j][k] = self.get(i, j, k);
                }
            }
        }
        t
    }

    pub fn from_full(t: &[[[f64; 3]; 3]; 3]) -> Self {
        let mut s = [0.0; 10];
        for (slot, &(i, j, k)) in TRIPLES.iter().enumerate() {
            s[slot] = t[i][j][k];
        }
        SymTensor3(s)
    }

    /// Full contraction with itself, summing over all 27 index slots.
    pub fn norm_sq(&self) -> f64 {
        let t = self.to_full();
        let mut s = 0.0;
        for a in t.iter() {
            for b in a.iter() {
                for c in b.iter() {
                    s += c * c;
                }
            }
        }
        s
    }
}

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn neg(a: &Vec3) -> Vec3 {
    [-a[0], -a[1], -a[2]]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// det[a, b, c] = ε^{ijk} a_i b_j c_k with ε^{123} = +1.
pub fn det3(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    dot(&cross(a, b), c)
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn mat_det(m: &Mat3) -> f64 {
    det3(&m[0], &m[1], &m[2])
}

pub fn identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

pub fn frob_sq(m: &Mat3) -> f64 {
    m.iter().flatten().map(|v| v * v).sum()
}

/// Quadratic form vᵀ M w.
pub fn bilinear(m: &Mat3, v: &Vec3, w: &Vec3) -> f64 {
    dot(v, &mat_vec(m, w))
}

/// Levi-Civita symbol with ε_{012} = +1.
pub fn levi(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Contraction T(a, b, c) of a full symmetric 3-tensor.
pub fn tri(t: &[[[f64; 3]; 3]; 3], a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                s += t[i][j][k] * a[i] * b[j] * c[k];
            }
        }
    }
    s
}

/// The vector T(·, b, c).
pub fn tri_vec(t: &[[[f64; 3]; 3]; 3], b: &Vec3, c: &Vec3) -> Vec3 {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..3 {
            for k in 0..3 {
                *o += t[i][j][k] * b[j] * c[k];
            }
        }
    }
    out
}

/// The matrix T(·, ·, c).
pub fn tri_mat(t: &[[[f64; 3]; 3]; 3], c: &Vec3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| t[i][j][k] * c[k]).sum();
        }
    }
    out
}

/// Trace vector (trT)_k = Σ_j T_jjk.
pub fn tri_trace(t: &[[[f64; 3]; 3]; 3]) -> Vec3 {
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        *o = (0..3).map(|j| t[j][j][k]).sum();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_slots_agree() {
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(SYM2[i][j], SYM2[j][i]);
                for k in 0..3 {
                    let s = SYM3[i][j][k];
                    assert_eq!(s, SYM3[j][i][k]);
                    assert_eq!(s, SYM3[k][j][i]);
                    assert_eq!(s, SYM3[i][k][j]);
                }
            }
        }
        for (slot, &(i, j, k)) in TRIPLES.iter().enumerate() {
            assert_eq!(SYM3[i][j][k], slot);
        }
        for (slot, &(i, j)) in PAIRS.iter().enumerate() {
            assert_eq!(SYM2[i][j], slot);
        }
    }

    #[test]
    fn determinant_orientation() {
        let e = identity();
        assert_eq!(det3(&e[0], &e[1], &e[2]), 1.0);
        assert_eq!(levi(0, 1, 2), 1.0);
        assert_eq!(levi(1, 0, 2), -1.0);
    }
}
