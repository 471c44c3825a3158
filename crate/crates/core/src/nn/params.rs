/// A model whose learnables can be visited as a fixed, ordered list of flat tensors.
///
/// Gradient buffers use the same type as the parameters, so the i-th tensor of
/// a gradient lines up with the i-th tensor of the model.
pub trait Parameters<T> {
    fn tensors(&self) -> Vec<&[T]>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

pub fn flatten<T: Copy, P: Parameters<T> + ?Sized>(p: &P) -> Vec<T> {
    p.tensors().concat()
}

/// Overwrites every parameter from a flat vector in [`Parameters::tensors`] order.
pub fn assign_flat<T: Copy, P: Parameters<T> + ?Sized>(p: &mut P, flat: &[T]) {
    assert_eq!(flat.len(), p.num_params(), "flat parameter length");
    let mut offset = 0;
    for t in p.tensors_mut() {
        let n = t.len();
        t.copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
}
