//! One residual temporal block: two causal convolutions with ReLU and a
//! residual path (1x1 projection when the widths differ).

use super::conv::{CausalConv1d, CausalConv1dCache};
use super::{Dense, Initializer, Param, Tensor};
use crate::{Error, Result};

pub const TCN_KERNEL: usize = 3;

#[derive(Debug, Clone)]
pub struct TcnBlock {
    pub conv1: CausalConv1d,
    pub conv2: CausalConv1d,
    pub projection: Option<Dense>,
}

#[derive(Debug, Clone)]
pub struct TcnCache {
    input: Tensor,
    c1: CausalConv1dCache,
    h1: Tensor,
    c2: CausalConv1dCache,
    h2: Tensor,
}

fn relu(t: &mut Tensor) {
    t.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
}

fn relu_mask(grad: &Tensor, activated: &Tensor) -> Tensor {
    let data = grad
        .data()
        .iter()
        .zip(activated.data())
        .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
        .collect();
    Tensor::from_vec(grad.shape(), data).expect("same shape")
}

impl TcnBlock {
    pub fn new(init: &mut Initializer, name: &str, input: usize, filters: usize) -> Self {
        Self {
            conv1: CausalConv1d::new(init, &format!("{name}.conv1"), TCN_KERNEL, input, filters),
            conv2: CausalConv1d::new(init, &format!("{name}.conv2"), TCN_KERNEL, filters, filters),
            projection: (input != filters).then(|| Dense::new(init, &format!("{name}.residual"), input, filters)),
        }
    }

    pub fn filters(&self) -> usize {
        self.conv2.conv.out_channels()
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, TcnCache)> {
        if x.rows() == 0 {
            return Err(Error::Shape("temporal block needs at least one frame".into()));
        }
        let (mut h1, c1) = self.conv1.forward(x)?;
        relu(&mut h1);
        let (mut h2, c2) = self.conv2.forward(&h1)?;
        relu(&mut h2);
        let residual = match &self.projection {
            Some(p) => p.forward(x)?,
            None => x.clone(),
        };
        let mut out = h2.clone();
        for (o, r) in out.data_mut().iter_mut().zip(residual.data()) {
            *o += r;
        }
        Ok((
            out,
            TcnCache {
                input: x.clone(),
                c1,
                h1,
                c2,
                h2,
            },
        ))
    }

    pub fn backward(&mut self, cache: &TcnCache, dout: &Tensor) -> Result<Tensor> {
        let d2 = relu_mask(dout, &cache.h2);
        let dh1 = self.conv2.backward(&cache.c2, &d2)?;
        let d1 = relu_mask(&dh1, &cache.h1);
        let mut dx = self.conv1.backward(&cache.c1, &d1)?;
        let dres = match &mut self.projection {
            Some(p) => p.backward(&cache.input, dout)?,
            None => dout.clone(),
        };
        for (a, b) in dx.data_mut().iter_mut().zip(dres.data()) {
            *a += b;
        }
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = self.conv1.conv.params();
        p.extend(self.conv2.conv.params());
        if let Some(d) = &self.projection {
            p.extend(d.params());
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.conv.params_mut();
        p.extend(self.conv2.conv.params_mut());
        if let Some(d) = &mut self.projection {
            p.extend(d.params_mut());
        }
        p
    }
}
