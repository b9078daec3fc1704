//! Matrix products: plain 2-D matmul and batched 3-D matmul, with a shared
//! 2-D right-hand side as the common special case for linear layers.

use super::{Scalar, Tensor};
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array3, ArrayD, ArrayView2, Axis, Ix2, Ix3, IxDyn};
use rayon::prelude::*;
use std::rc::Rc;

pub(crate) fn mm2<F: Scalar>(a: &ArrayView2<F>, b: &ArrayView2<F>) -> Array2<F> {
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    general_mat_mul(F::one(), a, b, F::zero(), &mut out);
    out
}

/// Batched matmul on raw arrays: `(B,M,K) x (B,K,N) -> (B,M,N)`.
/// Parallel over the batch axis; output order is deterministic.
pub(crate) fn bmm3<F: Scalar>(a: &Array3<F>, b: &Array3<F>) -> Array3<F> {
    let (ba, m, _k) = a.dim();
    let (bb, _k2, n) = b.dim();
    assert_eq!(ba, bb, "batch mismatch");
    let parts: Vec<Array2<F>> = (0..ba)
        .into_par_iter()
        .map(|i| mm2(&a.index_axis(Axis(0), i), &b.index_axis(Axis(0), i)))
        .collect();
    let mut out = Array3::zeros((ba, m, n));
    for (i, p) in parts.into_iter().enumerate() {
        out.index_axis_mut(Axis(0), i).assign(&p);
    }
    out
}

impl<F: Scalar> Tensor<F> {
    /// 2-D matrix product `(M,K) x (K,N)`.
    pub fn matmul(&self, rhs: &Tensor<F>) -> Tensor<F> {
        assert_eq!(self.data.ndim(), 2, "matmul lhs must be 2-D");
        assert_eq!(rhs.data.ndim(), 2, "matmul rhs must be 2-D");
        let a = self.data.view().into_dimensionality::<Ix2>().unwrap();
        let b = rhs.data.view().into_dimensionality::<Ix2>().unwrap();
        assert_eq!(a.ncols(), b.nrows(), "matmul inner dims");
        let out = mm2(&a, &b).into_dyn();
        Tensor::make(&[self, rhs], out, || {
            let (aid, bid) = (self.node, rhs.node);
            let (a, b) = (Rc::clone(&self.data), Rc::clone(&rhs.data));
            Box::new(move |g| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                let av = a.view().into_dimensionality::<Ix2>().unwrap();
                let bv = b.view().into_dimensionality::<Ix2>().unwrap();
                let mut grads = Vec::new();
                if let Some(id) = aid {
                    grads.push((id, mm2(&g2, &bv.t()).into_dyn()));
                }
                if let Some(id) = bid {
                    grads.push((id, mm2(&av.t(), &g2).into_dyn()));
                }
                grads
            })
        })
    }

    /// Batched matmul `(B,M,K) x (B,K,N)`, or `(B,M,K) x (K,N)` with a shared
    /// right-hand side.
    pub fn bmm(&self, rhs: &Tensor<F>) -> Tensor<F> {
        assert_eq!(self.data.ndim(), 3, "bmm lhs must be 3-D");
        let a = self.data.view().into_dimensionality::<Ix3>().unwrap();
        let (bsz, m, k) = a.dim();
        match rhs.data.ndim() {
            3 => {
                let b = rhs.data.view().into_dimensionality::<Ix3>().unwrap();
                assert_eq!(b.dim().0, bsz, "bmm batch mismatch");
                assert_eq!(b.dim().1, k, "bmm inner dims");
                let out = bmm3(&a.to_owned(), &b.to_owned()).into_dyn();
                Tensor::make(&[self, rhs], out, || {
                    let (aid, bid) = (self.node, rhs.node);
                    let (a, b) = (Rc::clone(&self.data), Rc::clone(&rhs.data));
                    Box::new(move |g| {
                        let g3 = g.view().into_dimensionality::<Ix3>().unwrap();
                        let a3 = a.view().into_dimensionality::<Ix3>().unwrap();
                        let b3 = b.view().into_dimensionality::<Ix3>().unwrap();
                        let bsz = a3.dim().0;
                        let mut grads = Vec::new();
                        if let Some(id) = aid {
                            let parts: Vec<Array2<F>> = (0..bsz)
                                .into_par_iter()
                                .map(|i| {
                                    mm2(
                                        &g3.index_axis(Axis(0), i),
                                        &b3.index_axis(Axis(0), i).t(),
                                    )
                                })
                                .collect();
                            let mut ga = Array3::zeros(a3.dim());
                            for (i, p) in parts.into_iter().enumerate() {
                                ga.index_axis_mut(Axis(0), i).assign(&p);
                            }
                            grads.push((id, ga.into_dyn()));
                        }
                        if let Some(id) = bid {
                            let parts: Vec<Array2<F>> = (0..bsz)
                                .into_par_iter()
                                .map(|i| {
                                    mm2(
                                        &a3.index_axis(Axis(0), i).t(),
                                        &g3.index_axis(Axis(0), i),
                                    )
                                })
                                .collect();
                            let mut gb = Array3::zeros(b3.dim());
                            for (i, p) in parts.into_iter().enumerate() {
                                gb.index_axis_mut(Axis(0), i).assign(&p);
                            }
                            grads.push((id, gb.into_dyn()));
                        }
                        grads
                    })
                })
            }
            2 => {
                // shared rhs: fold batch into rows
                let flat = self.reshape(&[bsz * m, k]);
                let out = flat.matmul(rhs);
                out.reshape(&[bsz, m, rhs.shape()[1]])
            }
            other => panic!("bmm rhs must be 2-D or 3-D, got {other}-D"),
        }
    }

    /// Applies a `(D,O)` weight to the last axis of an N-D input.
    pub fn matmul_last(&self, w: &Tensor<F>) -> Tensor<F> {
        let shape = self.shape().to_vec();
        let d = *shape.last().expect("matmul_last on 0-D input");
        assert_eq!(d, w.shape()[0], "matmul_last inner dims");
        let rows: usize = shape[..shape.len() - 1].iter().product();
        let flat = self.reshape(&[rows, d]);
        let out = flat.matmul(w);
        let mut new_shape = shape[..shape.len() - 1].to_vec();
        new_shape.push(w.shape()[1]);
        out.reshape(&new_shape)
    }
}

pub(crate) fn _unused<F: Scalar>(_: &ArrayD<F>) {}
