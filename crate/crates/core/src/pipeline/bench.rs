//! Benchmark circuits: small canonical constructions of the usual suite.

use std::f64::consts::PI;

use crate::circuit::{Circuit, Gate};

/// Gate-level builder over the basis plus a few textbook composites.
struct B(Circuit);

impl B {
    fn new(n: usize, name: &str) -> Self {
        B(Circuit::new(n, name).expect("benchmarks have qubits"))
    }

    fn g(&mut self, g: Gate) -> &mut Self {
        self.0.push(g).expect("benchmark gate is valid");
        self
    }

    fn x(&mut self, q: usize) -> &mut Self {
        self.g(Gate::X(q))
    }

    fn rz(&mut self, q: usize, a: f64) -> &mut Self {
        self.g(Gate::Rz(q, a))
    }

    fn cx(&mut self, c: usize, t: usize) -> &mut Self {
        self.g(Gate::Cx(c, t))
    }

    /// Hadamard up to global phase.
    fn h(&mut self, q: usize) -> &mut Self {
        self.rz(q, PI / 2.0).g(Gate::Sx(q)).rz(q, PI / 2.0)
    }

    fn ry(&mut self, q: usize, a: f64) -> &mut Self {
        self.g(Gate::U3(q, a, 0.0, 0.0))
    }

    fn rx(&mut self, q: usize, a: f64) -> &mut Self {
        self.g(Gate::U3(q, a, -PI / 2.0, PI / 2.0))
    }

    fn cp(&mut self, c: usize, t: usize, a: f64) -> &mut Self {
        self.rz(c, a / 2.0).cx(c, t).rz(t, -a / 2.0).cx(c, t).rz(t, a / 2.0)
    }

    fn cz(&mut self, c: usize, t: usize) -> &mut Self {
        self.h(t).cx(c, t).h(t)
    }

    fn cry(&mut self, c: usize, t: usize, a: f64) -> &mut Self {
        self.ry(t, a / 2.0).cx(c, t).ry(t, -a / 2.0).cx(c, t)
    }

    fn rzz(&mut self, a: usize, b: usize, angle: f64) -> &mut Self {
        self.cx(a, b).rz(b, angle).cx(a, b)
    }

    fn swap(&mut self, a: usize, b: usize) -> &mut Self {
        self.cx(a, b).cx(b, a).cx(a, b)
    }

    fn ccx(&mut self, a: usize, b: usize, t: usize) -> &mut Self {
        let (tq, tdg) = (PI / 4.0, -PI / 4.0);
        self.h(t)
            .cx(b, t)
            .rz(t, tdg)
            .cx(a, t)
            .rz(t, tq)
            .cx(b, t)
            .rz(t, tdg)
            .cx(a, t)
            .rz(b, tq)
            .rz(t, tq)
            .h(t)
            .cx(a, b)
            .rz(a, tq)
            .rz(b, tdg)
            .cx(a, b)
    }

    fn done(&mut self) -> Circuit {
        let mut c = self.0.clone();
        c.measure_all();
        c
    }
}

fn qft_body(b: &mut B, n: usize) {
    for i in 0..n {
        b.h(i);
        for j in i + 1..n {
            b.cp(j, i, PI / f64::from(1u32 << (j - i)));
        }
    }
    for i in 0..n / 2 {
        b.swap(i, n - 1 - i);
    }
}

fn iqft_body(b: &mut B, n: usize) {
    for i in 0..n / 2 {
        b.swap(i, n - 1 - i);
    }
    for i in (0..n).rev() {
        for j in (i + 1..n).rev() {
            b.cp(j, i, -PI / f64::from(1u32 << (j - i)));
        }
        b.h(i);
    }
}

pub fn bell() -> Circuit {
    B::new(4, "BELL").h(0).cx(0, 1).h(2).cx(2, 3).done()
}

pub fn cat() -> Circuit {
    B::new(4, "CAT").h(0).cx(0, 1).cx(1, 2).cx(2, 3).done()
}

pub fn tof() -> Circuit {
    B::new(3, "TOF").h(0).h(1).ccx(0, 1, 2).done()
}

/// QFT of a period-4 register state, which concentrates on four outcomes.
pub fn qft() -> Circuit {
    let mut b = B::new(4, "QFT");
    b.h(0).h(1).x(3);
    qft_body(&mut b, 4);
    b.done()
}

/// Inverse QFT applied to the Fourier state of 5, which it maps back.
pub fn iqft() -> Circuit {
    let n = 4;
    let mut b = B::new(n, "IQFT");
    let value = 5.0;
    for q in 0..n {
        b.h(q);
        // qubit 0 is the most significant bit of the register
        b.rz(q, 2.0 * PI * value / f64::from(1u32 << (q + 1)));
    }
    iqft_body(&mut b, n);
    b.done()
}

/// One-bit ripple-carry adder (cin, a, b, cout) on a superposed `a`.
pub fn add() -> Circuit {
    let (cin, a, bq, cout) = (0, 1, 2, 3);
    let mut b = B::new(4, "ADD");
    b.h(a).x(bq).x(cin);
    // majority
    b.cx(a, bq).cx(a, cin).ccx(cin, bq, a);
    b.cx(a, cout);
    // unmajority and add
    b.ccx(cin, bq, a).cx(a, cin).cx(cin, bq);
    b.done()
}

pub fn qaoa() -> Circuit {
    let (gamma, beta) = (0.8, 0.4);
    let mut b = B::new(3, "QAOA");
    for q in 0..3 {
        b.h(q);
    }
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        b.rzz(i, j, 2.0 * gamma);
    }
    for q in 0..3 {
        b.rx(q, 2.0 * beta);
    }
    b.done()
}

pub fn var() -> Circuit {
    let theta = [0.3, 1.1, -0.7, 0.5, 0.9, -1.2, 0.4, 0.8];
    let mut b = B::new(4, "VAR");
    for q in 0..4 {
        b.ry(q, theta[q]);
    }
    b.cx(0, 1).cx(1, 2).cx(2, 3);
    for q in 0..4 {
        b.ry(q, theta[4 + q]);
    }
    b.done()
}

/// Teleportation with the classical corrections deferred to quantum gates.
pub fn tel() -> Circuit {
    let mut b = B::new(3, "TEL");
    b.g(Gate::U3(0, 1.1, 0.3, 0.0));
    b.h(1).cx(1, 2);
    b.cx(0, 1).h(0);
    b.cx(1, 2).cz(0, 2);
    b.done()
}

/// Two-level linear-system style circuit: ancilla rotation conditioned on an
/// eigenvalue register, then uncomputation.
pub fn lns() -> Circuit {
    let mut b = B::new(3, "LNS");
    b.ry(0, 0.8).h(1);
    b.cp(1, 0, PI / 2.0);
    b.h(1);
    b.cry(1, 2, 1.2).cry(0, 2, 0.6);
    b.h(1);
    b.cp(1, 0, -PI / 2.0);
    b.h(1);
    b.done()
}

/// BELL, CAT, TOF, QFT, IQFT, ADD, QAOA, VAR, TEL and LNS.
pub fn benchmark_suite() -> Vec<Circuit> {
    vec![
        bell(),
        cat(),
        tof(),
        qft(),
        iqft(),
        add(),
        qaoa(),
        var(),
        tel(),
        lns(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ideal_distribution;

    fn p(c: &Circuit, bits: &str) -> f64 {
        // bit i of the outcome index is qubit i, printed leftmost
        let idx = bits
            .chars()
            .enumerate()
            .fold(0, |acc, (i, ch)| acc | (usize::from(ch == '1') << i));
        ideal_distribution(c).unwrap().prob(idx)
    }

    #[test]
    fn suite_shape() {
        let s = benchmark_suite();
        assert_eq!(s.len(), 10);
        for c in &s {
            assert!(c.num_qubits() <= 10 && c.all_measured());
        }
    }

    #[test]
    fn textbook_outputs() {
        let b = bell();
        for o in ["0000", "1100", "0011", "1111"] {
            assert!((p(&b, o) - 0.25).abs() < 1e-9);
        }
        let c = cat();
        assert!((p(&c, "0000") - 0.5).abs() < 1e-9 && (p(&c, "1111") - 0.5).abs() < 1e-9);
        let t = tof();
        for o in ["000", "100", "010", "111"] {
            assert!((p(&t, o) - 0.25).abs() < 1e-9, "{o}");
        }
        // IQFT recovers 5 = 0b0101 written most significant qubit first
        assert!((p(&iqft(), "0101") - 1.0).abs() < 1e-9);
    }

    #[test]
    fn adder_adds() {
        // cin = 1, b = 1, a in {0, 1}: sum lands on b, carry on cout
        let c = add();
        assert!((p(&c, "1001") - 0.5).abs() < 1e-9);
        assert!((p(&c, "1111") - 0.5).abs() < 1e-9);
    }

    #[test]
    fn teleport_moves_the_state() {
        let d = ideal_distribution(&tel()).unwrap();
        let p2_one: f64 = (0..8).filter(|i| i & 4 != 0).map(|i| d.prob(i)).sum();
        let want = (1.1f64 / 2.0).sin().powi(2);
        assert!((p2_one - want).abs() < 1e-9);
    }

    #[test]
    fn qft_of_periodic_state_has_four_peaks() {
        for o in ["0000", "1000", "0100", "1100"] {
            assert!((p(&qft(), o) - 0.25).abs() < 1e-9, "{o}");
        }
    }
}
