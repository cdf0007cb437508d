//! Deliberate fault injection for mutation testing of the verification
//! suites. A flipped primitive negates every tensor its backward pass
//! returns, on the current thread only, for the duration of a closure.

use std::cell::RefCell;

thread_local! {
    static FLIPPED: RefCell<Option<String>> = const { RefCell::new(None) };
}

/// Runs `f` with the backward pass of every primitive labelled `label`
/// sign-flipped.
pub fn with_flipped_backward<R>(label: &str, f: impl FnOnce() -> R) -> R {
    struct Reset(Option<String>);
    impl Drop for Reset {
        fn drop(&mut self) {
            let prev = self.0.take();
            FLIPPED.with(|c| *c.borrow_mut() = prev);
        }
    }
    let prev = FLIPPED.with(|c| c.borrow_mut().replace(label.to_string()));
    let _reset = Reset(prev);
    f()
}

pub(crate) fn is_flipped(label: &str) -> bool {
    FLIPPED.with(|c| c.borrow().as_deref() == Some(label))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_is_scoped() {
        assert!(!is_flipped("mul"));
        with_flipped_backward("mul", || {
            assert!(is_flipped("mul"));
            assert!(!is_flipped("tanh"));
        });
        assert!(!is_flipped("mul"));
    }
}
