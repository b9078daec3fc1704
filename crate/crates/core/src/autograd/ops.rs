//! Elementwise, reduction and shape ops with their backward rules.

use super::{Scalar, Tensor};
use ndarray::{ArrayD, Axis, IxDyn, Slice, Zip};
use std::rc::Rc;

/// Right-aligned broadcast shape of two shapes.
pub(crate) fn co_broadcast(a: &[usize], b: &[usize]) -> Vec<usize> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let ad = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let bd = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        assert!(
            ad == bd || ad == 1 || bd == 1,
            "incompatible broadcast shapes {a:?} and {b:?}"
        );
        out[i] = ad.max(bd);
    }
    out
}

/// Sums `g` down to `shape` (inverse of broadcasting).
pub(crate) fn reduce_to_shape<F: Scalar>(g: &ArrayD<F>, shape: &[usize]) -> ArrayD<F> {
    let mut out = g.to_owned();
    while out.ndim() > shape.len() {
        out = out.sum_axis(Axis(0));
    }
    for i in 0..shape.len() {
        if out.shape()[i] != shape[i] {
            debug_assert_eq!(shape[i], 1, "cannot reduce axis {i} from {:?} to {shape:?}", g.shape());
            out = out.sum_axis(Axis(i)).insert_axis(Axis(i));
        }
    }
    out
}

fn bin_forward<F: Scalar>(
    a: &ArrayD<F>,
    b: &ArrayD<F>,
    f: impl Fn(F, F) -> F,
) -> ArrayD<F> {
    let shape = co_broadcast(a.shape(), b.shape());
    let av = a.broadcast(IxDyn(&shape)).expect("lhs broadcast");
    let bv = b.broadcast(IxDyn(&shape)).expect("rhs broadcast");
    let mut out = ArrayD::zeros(IxDyn(&shape));
    Zip::from(&mut out).and(&av).and(&bv).for_each(|o, &x, &y| *o = f(x, y));
    out
}

impl<F: Scalar> Tensor<F> {
    pub fn add(&self, other: &Tensor<F>) -> Tensor<F> {
        let out = bin_forward(&self.data, &other.data, |x, y| x + y);
        Tensor::make(&[self, other], out, || {
            let (aid, bid) = (self.node, other.node);
            let (ashape, bshape) = (self.shape().to_vec(), other.shape().to_vec());
            Box::new(move |g| {
                let mut grads = Vec::new();
                if let Some(id) = aid {
                    grads.push((id, reduce_to_shape(g, &ashape)));
                }
                if let Some(id) = bid {
                    grads.push((id, reduce_to_shape(g, &bshape)));
                }
                grads
            })
        })
    }

    pub fn sub(&self, other: &Tensor<F>) -> Tensor<F> {
        let out = bin_forward(&self.data, &other.data, |x, y| x - y);
        Tensor::make(&[self, other], out, || {
            let (aid, bid) = (self.node, other.node);
            let (ashape, bshape) = (self.shape().to_vec(), other.shape().to_vec());
            Box::new(move |g| {
                let mut grads = Vec::new();
                if let Some(id) = aid {
                    grads.push((id, reduce_to_shape(g, &ashape)));
                }
                if let Some(id) = bid {
                    grads.push((id, reduce_to_shape(&g.mapv(|v| -v), &bshape)));
                }
                grads
            })
        })
    }

    pub fn mul(&self, other: &Tensor<F>) -> Tensor<F> {
        let out = bin_forward(&self.data, &other.data, |x, y| x * y);
        Tensor::make(&[self, other], out, || {
            let (aid, bid) = (self.node, other.node);
            let (a, b) = (Rc::clone(&self.data), Rc::clone(&other.data));
            Box::new(move |g| {
                let mut grads = Vec::new();
                if let Some(id) = aid {
                    grads.push((id, reduce_to_shape(&bin_forward(g, &b, |x, y| x * y), a.shape())));
                }
                if let Some(id) = bid {
                    grads.push((id, reduce_to_shape(&bin_forward(g, &a, |x, y| x * y), b.shape())));
                }
                grads
            })
        })
    }

    pub fn neg(&self) -> Tensor<F> {
        self.scale(-F::one())
    }

    pub fn scale(&self, c: F) -> Tensor<F> {
        let out = self.data.mapv(|v| v * c);
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            Box::new(move |g| vec![(id, g.mapv(|v| v * c))])
        })
    }

    pub fn add_scalar(&self, c: F) -> Tensor<F> {
        let out = self.data.mapv(|v| v + c);
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            Box::new(move |g| vec![(id, g.clone())])
        })
    }

    pub fn square(&self) -> Tensor<F> {
        let out = self.data.mapv(|v| v * v);
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            let a = Rc::clone(&self.data);
            Box::new(move |g| {
                let two = F::from_f64(2.0);
                vec![(id, bin_forward(g, &a, |gv, av| gv * two * av))]
            })
        })
    }

    pub fn exp(&self) -> Tensor<F> {
        let out_rc = Rc::new(self.data.mapv(|v| v.exp()));
        let keep = Rc::clone(&out_rc);
        Tensor::make_rc(&[self], out_rc, || {
            let id = self.node.unwrap();
            Box::new(move |g| vec![(id, bin_forward(g, &keep, |gv, yv| gv * yv))])
        })
    }

    pub fn sqrt(&self) -> Tensor<F> {
        let out_rc = Rc::new(self.data.mapv(|v| v.sqrt()));
        let keep = Rc::clone(&out_rc);
        Tensor::make_rc(&[self], out_rc, || {
            let id = self.node.unwrap();
            let half = F::from_f64(0.5);
            Box::new(move |g| vec![(id, bin_forward(g, &keep, |gv, yv| gv * half / yv))])
        })
    }

    /// `1 / sqrt(x)`.
    pub fn rsqrt(&self) -> Tensor<F> {
        let out_rc = Rc::new(self.data.mapv(|v| F::one() / v.sqrt()));
        let keep = Rc::clone(&out_rc);
        Tensor::make_rc(&[self], out_rc, || {
            let id = self.node.unwrap();
            let half = F::from_f64(-0.5);
            Box::new(move |g| {
                vec![(id, bin_forward(g, &keep, |gv, yv| gv * half * yv * yv * yv))]
            })
        })
    }

    pub fn recip(&self) -> Tensor<F> {
        let out_rc = Rc::new(self.data.mapv(|v| F::one() / v));
        let keep = Rc::clone(&out_rc);
        Tensor::make_rc(&[self], out_rc, || {
            let id = self.node.unwrap();
            Box::new(move |g| vec![(id, bin_forward(g, &keep, |gv, yv| -gv * yv * yv))])
        })
    }

    pub fn sigmoid(&self) -> Tensor<F> {
        let out_rc = Rc::new(self.data.mapv(sigmoid_val));
        let keep = Rc::clone(&out_rc);
        Tensor::make_rc(&[self], out_rc, || {
            let id = self.node.unwrap();
            Box::new(move |g| {
                vec![(id, bin_forward(g, &keep, |gv, yv| gv * yv * (F::one() - yv)))]
            })
        })
    }

    /// `x * sigmoid(x)`.
    pub fn silu(&self) -> Tensor<F> {
        let out = self.data.mapv(|v| v * sigmoid_val(v));
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            let a = Rc::clone(&self.data);
            Box::new(move |g| {
                vec![(
                    id,
                    bin_forward(g, &a, |gv, xv| {
                        let s = sigmoid_val(xv);
                        gv * s * (F::one() + xv * (F::one() - s))
                    }),
                )]
            })
        })
    }

    pub fn sum_all(&self) -> Tensor<F> {
        let out = ArrayD::from_elem(IxDyn(&[]), self.data.sum());
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            let shape = self.shape().to_vec();
            Box::new(move |g| {
                let gv = *g.iter().next().unwrap();
                vec![(id, ArrayD::from_elem(IxDyn(&shape), gv))]
            })
        })
    }

    pub fn mean_all(&self) -> Tensor<F> {
        let n = F::from_f64(self.data.len() as f64);
        self.sum_all().scale(F::one() / n)
    }

    /// Sum over `axes`, keeping reduced dimensions as size 1.
    pub fn sum_axes_keep(&self, axes: &[usize]) -> Tensor<F> {
        let mut out = self.data.to_owned();
        let mut sorted: Vec<usize> = axes.to_vec();
        sorted.sort_unstable();
        for &ax in &sorted {
            out = out.sum_axis(Axis(ax)).insert_axis(Axis(ax));
        }
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            let shape = self.shape().to_vec();
            Box::new(move |g| {
                vec![(id, g.broadcast(IxDyn(&shape)).expect("grad broadcast").to_owned())]
            })
        })
    }

    /// Mean over `axes`, keeping reduced dimensions as size 1.
    pub fn mean_axes_keep(&self, axes: &[usize]) -> Tensor<F> {
        let count: usize = axes.iter().map(|&a| self.shape()[a]).product();
        self.sum_axes_keep(axes).scale(F::one() / F::from_f64(count as f64))
    }

    pub fn reshape(&self, shape: &[usize]) -> Tensor<F> {
        let n: usize = shape.iter().product();
        assert_eq!(n, self.data.len(), "reshape {:?} -> {shape:?}", self.shape());
        let out = self
            .data
            .view()
            .to_shape(IxDyn(shape))
            .expect("reshape of standard-layout array")
            .to_owned();
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            let orig = self.shape().to_vec();
            Box::new(move |g| {
                vec![(id, g.view().to_shape(IxDyn(&orig)).expect("grad reshape").to_owned())]
            })
        })
    }

    pub fn permute(&self, axes: &[usize]) -> Tensor<F> {
        let out = self.data.view().permuted_axes(axes).as_standard_layout().to_owned();
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            let mut inverse = vec![0usize; axes.len()];
            for (i, &a) in axes.iter().enumerate() {
                inverse[a] = i;
            }
            Box::new(move |g| {
                vec![(id, g.view().permuted_axes(&inverse[..]).as_standard_layout().to_owned())]
            })
        })
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Tensor<F> {
        let out = self.data.broadcast(IxDyn(shape)).expect("broadcast_to").to_owned();
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            let orig = self.shape().to_vec();
            Box::new(move |g| vec![(id, reduce_to_shape(g, &orig))])
        })
    }

    /// Contiguous slice `[start, start+len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Tensor<F> {
        let out = self
            .data
            .slice_axis(Axis(axis), Slice::from(start..start + len))
            .to_owned();
        Tensor::make(&[self], out, || {
            let id = self.node.unwrap();
            let shape = self.shape().to_vec();
            Box::new(move |g| {
                let mut gx = ArrayD::zeros(IxDyn(&shape));
                gx.slice_axis_mut(Axis(axis), Slice::from(start..start + len)).assign(g);
                vec![(id, gx)]
            })
        })
    }

    pub fn concat(parts: &[&Tensor<F>], axis: usize) -> Tensor<F> {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let out = ndarray::concatenate(Axis(axis), &views).expect("concat shapes");
        Tensor::make(parts, out, || {
            let metas: Vec<(Option<usize>, usize)> =
                parts.iter().map(|p| (p.node, p.shape()[axis])).collect();
            Box::new(move |g| {
                let mut grads = Vec::new();
                let mut offset = 0;
                for (id, len) in &metas {
                    if let Some(id) = id {
                        grads.push((
                            *id,
                            g.slice_axis(Axis(axis), Slice::from(offset..offset + len))
                                .to_owned(),
                        ));
                    }
                    offset += len;
                }
                grads
            })
        })
    }

    /// Row gather from a 2-D table.
    pub fn index_select0(&self, ids: &[usize]) -> Tensor<F> {
        assert_eq!(self.data.ndim(), 2, "index_select0 expects a 2-D table");
        let d = self.shape()[1];
        let mut out = ArrayD::zeros(IxDyn(&[ids.len(), d]));
        for (i, &id) in ids.iter().enumerate() {
            out.index_axis_mut(Axis(0), i)
                .assign(&self.data.index_axis(Axis(0), id));
        }
        Tensor::make(&[self], out, || {
            let node = self.node.unwrap();
            let shape = self.shape().to_vec();
            let ids = ids.to_vec();
            Box::new(move |g| {
                let mut gx = ArrayD::zeros(IxDyn(&shape));
                for (i, &id) in ids.iter().enumerate() {
                    let mut row = gx.index_axis_mut(Axis(0), id);
                    row += &g.index_axis(Axis(0), i);
                }
                vec![(node, gx)]
            })
        })
    }

    /// Numerically stable softmax over the last axis.
    pub fn softmax_last(&self) -> Tensor<F> {
        let last = self.data.ndim() - 1;
        let mut out = self.data.to_owned();
        for mut lane in out.lanes_mut(Axis(last)) {
            let m = lane.fold(F::neg_infinity(), |acc, &v| acc.max(v));
            let mut sum = F::zero();
            for v in lane.iter_mut() {
                *v = (*v - m).exp();
                sum += *v;
            }
            for v in lane.iter_mut() {
                *v /= sum;
            }
        }
        let out_rc = Rc::new(out);
        let keep = Rc::clone(&out_rc);
        Tensor::make_rc(&[self], out_rc, || {
            let id = self.node.unwrap();
            Box::new(move |g| {
                // dx = y * (g - sum(g * y, last))
                let mut gx = bin_forward(g, &keep, |gv, yv| gv * yv);
                let yv = keep.view();
                for (mut glane, ylane) in
                    gx.lanes_mut(Axis(last)).into_iter().zip(yv.lanes(Axis(last)))
                {
                    let s = glane.sum();
                    for (gv, yv) in glane.iter_mut().zip(ylane.iter()) {
                        *gv -= s * *yv;
                    }
                }
                vec![(id, gx)]
            })
        })
    }
}

#[inline]
fn sigmoid_val<F: Scalar>(v: F) -> F {
    F::one() / (F::one() + (-v).exp())
}
