//! Builtin names available to configs, and the shipped example configs.

use std::fmt::Write as _;

use kerflow_core::kernels::BUILTIN_KERNELS;

pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
}

pub const KERNEL_NOTES: &[Entry] = &[
    Entry {
        name: "fock",
        summary: "Fock space kernel K(x,y) := e^{<x,y>}, scaled",
    },
    Entry {
        name: "gaussian_rbf",
        summary: "translation- and rotation-invariant Gaussian",
    },
    Entry {
        name: "ou",
        summary: "Ornstein-Uhlenbeck covariance, reflection positive in 1-D",
    },
    Entry {
        name: "ou_mixture",
        summary: "superposition of ou kernels, one quotient mode per mass",
    },
    Entry {
        name: "constant",
        summary: "rank-one trivial kernel",
    },
    Entry {
        name: "cos_diff",
        summary: "rank-two kernel whose twisted form is indefinite",
    },
    Entry {
        name: "determinant",
        summary: "det(1 - xy^T)^(-s) on the matrix ball",
    },
    Entry {
        name: "laplace",
        summary: "Laplace transform of a measure; cosh((x+y)/2) from atoms {-1, 1}",
    },
    Entry {
        name: "gaussian_laplace",
        summary: "Laplace transform of a Gaussian, e^{(x+y)^2/8} at sigma 1",
    },
    Entry {
        name: "mass_shell",
        summary: "mass-shell Laplace kernel on the half-plane x1 > 0",
    },
    Entry {
        name: "hardy",
        summary: "Hardy space kernel 1/(1 - xy)",
    },
];

pub const ALGEBRAS: &[Entry] = &[
    Entry {
        name: "euclidean_motion",
        summary: "euclidean_motion(d,p,q): so(d) + R^d with involution from I_{p,q}",
    },
    Entry {
        name: "abelian",
        summary: "abelian(d): R^d with every direction in q",
    },
    Entry {
        name: "matrix_involutive",
        summary: "matrix_involutive(n): gl(n) split by X -> -X^T, acting by right multiplication",
    },
];

pub const FIELDS: &[Entry] = &[
    Entry {
        name: "rotation",
        summary: "(-y, x) on the plane",
    },
    Entry {
        name: "shear",
        summary: "(0, x) on the plane",
    },
    Entry {
        name: "translation",
        summary: "unit field; needs `dim` and `axis`",
    },
    Entry {
        name: "constant",
        summary: "constant field; needs `vector`",
    },
    Entry {
        name: "quadratic_1d",
        summary: "x^2 on x < 1, finite-time blowup",
    },
    Entry {
        name: "quadratic_2d",
        summary: "(x^2 - y, xy) on the plane",
    },
    Entry {
        name: "trigonometric_2d",
        summary: "(sin y, cos x) on the plane",
    },
];

pub const ACTIONS: &[Entry] = &[
    Entry {
        name: "affine",
        summary: "beta(x)(p) = -(A p + b) with closed-form flows",
    },
    Entry {
        name: "right_multiplication",
        summary: "beta(x)(g) = g X on flattened matrices",
    },
];

pub const SEMIGROUPS: &[Entry] = &[
    Entry {
        name: "scalar_power",
        summary: "phi(u) = u^a on (0, 1], star the identity; params `a`",
    },
    Entry {
        name: "contraction_determinant",
        summary:
            "phi(u) = det(1 - u)^(-s) on n x n contractions, star the transpose; params `n`, `s`, `count`, `max_norm`",
    },
];

pub struct ExampleConfig {
    pub name: &'static str,
    pub summary: &'static str,
    pub json: &'static str,
}

macro_rules! example {
    ($name:literal, $summary:literal) => {
        ExampleConfig {
            name: $name,
            summary: $summary,
            json: include_str!(concat!("../configs/", $name, ".json")),
        }
    };
}

pub const EXAMPLES: &[ExampleConfig] = &[
    example!(
        "flow_laws",
        "group law of rotation and euclidean-motion flows on the plane"
    ),
    example!(
        "bracket_order",
        "flow-based Lie derivative against the bracket, order fit"
    ),
    example!(
        "compatibility_laplace",
        "cosh((x+y)/2) with the translation in q, plus flow invariance"
    ),
    example!(
        "compatibility_rotation",
        "Gaussian kernel with the full euclidean algebra in h"
    ),
    example!(
        "froelich_rank_one",
        "semigroup on an eigen-section of a rank-one kernel"
    ),
    example!(
        "froelich_laplace",
        "Froelich relation for e^{(x+y)^2/8} over Chebyshev refinements"
    ),
    example!(
        "cdual_mass_shell",
        "c-dual table for the mass-shell kernel on a grid ladder"
    ),
    example!("luscher_mack_power", "1x1 pipeline for phi(u) = u^1.5"),
    example!("luscher_mack_determinant", "2x2 determinant pipeline at s = 2"),
    example!("os_ou", "OS quotient and transfer semigroup for the ou kernel"),
    example!("os_mixture", "two-mode OS quotient for an ou mixture"),
    example!("rp_axioms", "grid translations against a coordinate reflection"),
];

pub fn example(name: &str) -> Option<&'static ExampleConfig> {
    EXAMPLES.iter().find(|e| e.name == name)
}

/// Human-readable listing of everything above.
pub fn render() -> String {
    let mut out = String::new();
    let section = |out: &mut String, title: &str, rows: &mut dyn Iterator<Item = (String, String)>| {
        let _ = writeln!(out, "{title}:");
        for (name, summary) in rows {
            let _ = writeln!(out, "  {name:<26} {summary}");
        }
        out.push('\n');
    };
    section(
        &mut out,
        "kernels",
        &mut BUILTIN_KERNELS.iter().map(|k| {
            let note = KERNEL_NOTES.iter().find(|e| e.name == k.name).map_or("", |e| e.summary);
            (k.name.to_string(), format!("{}  [{}]", note, k.formula))
        }),
    );
    let plain = |list: &'static [Entry]| list.iter().map(|e| (e.name.to_string(), e.summary.to_string()));
    section(&mut out, "algebras", &mut plain(ALGEBRAS));
    section(&mut out, "fields", &mut plain(FIELDS));
    section(&mut out, "actions", &mut plain(ACTIONS));
    section(&mut out, "semigroups", &mut plain(SEMIGROUPS));
    section(
        &mut out,
        "example configs",
        &mut EXAMPLES.iter().map(|e| (e.name.to_string(), e.summary.to_string())),
    );
    out.pop();
    out
}
