//! Problem instances `(C, K, f)` and their JSON file form.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bifunction::Bifunction;
use crate::error::{check_dim, QeqError, Result};
use crate::map::SetValuedMap;
use crate::reductions::gnep::Game;
use crate::reductions::qvi::Operator;
use crate::region::ConvexRegion;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Qep,
    Qvi,
    Gnep,
}

fn default_tol_feas() -> f64 {
    1e-9
}

fn default_tol_sol() -> f64 {
    1e-6
}

/// Grid spacing, tolerances and optional radius/seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub grid_h: f64,
    #[serde(default = "default_tol_feas")]
    pub tol_feas: f64,
    #[serde(default = "default_tol_sol")]
    pub tol_sol: f64,
    /// Window used to probe unbounded sets; defaults to `4ρ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Numerics {
    pub fn new(grid_h: f64) -> Self {
        Numerics {
            grid_h,
            tol_feas: default_tol_feas(),
            tol_sol: default_tol_sol(),
            probe_radius: None,
            rho: None,
            seed: 0,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_probe_radius(mut self, r: f64) -> Self {
        self.probe_radius = Some(r);
        self
    }

    /// The probe window for radius `rho`.
    pub fn probe_radius_for(&self, rho: f64) -> f64 {
        self.probe_radius.unwrap_or(4.0 * rho)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(QeqError::Schema(format!("numerics.{name} must be positive, got {v}")))
            }
        };
        positive("grid_h", self.grid_h)?;
        positive("tol_feas", self.tol_feas)?;
        positive("tol_sol", self.tol_sol)?;
        if let Some(r) = self.probe_radius {
            positive("probe_radius", r)?;
        }
        if let Some(r) = self.rho {
            positive("rho", r)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    schema_version: u32,
    name: String,
    kind: ProblemKind,
    n: usize,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    c: Option<ConvexRegion>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    k: Option<SetValuedMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f: Option<Bifunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    operator: Option<Operator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    game: Option<Game>,
    numerics: Numerics,
}

/// `(C, K, f)` with a kind tag. QVI instances carry their operator inside
/// `f = f_T`, GNEP instances their game inside `f = f^{NI}`, and for games `C`
/// and `K` are derived from the players.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct ProblemInstance {
    pub name: String,
    pub kind: ProblemKind,
    pub n: usize,
    pub c: ConvexRegion,
    pub k: SetValuedMap,
    pub f: Bifunction,
    pub numerics: Numerics,
}

impl TryFrom<InstanceFile> for ProblemInstance {
    type Error = QeqError;

    fn try_from(file: InstanceFile) -> Result<Self> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(QeqError::Schema(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let missing = |what: &str| QeqError::Schema(format!("{:?} instance needs field {what}", file.kind));
        let unexpected = |what: &str| QeqError::Schema(format!("{:?} instance must not carry field {what}", file.kind));
        let inst = match file.kind {
            ProblemKind::Qep => {
                if file.operator.is_some() {
                    return Err(unexpected("operator"));
                }
                if file.game.is_some() {
                    return Err(unexpected("game"));
                }
                let f = file.f.ok_or_else(|| missing("f"))?;
                if matches!(f, Bifunction::Qvi { .. } | Bifunction::NikaidoIsoda { .. }) {
                    return Err(QeqError::Schema(
                        "derived bifunctions are written through kind qvi or gnep".into(),
                    ));
                }
                ProblemInstance {
                    name: file.name,
                    kind: ProblemKind::Qep,
                    n: file.n,
                    c: file.c.ok_or_else(|| missing("C"))?,
                    k: file.k.ok_or_else(|| missing("K"))?,
                    f,
                    numerics: file.numerics,
                }
            }
            ProblemKind::Qvi => {
                if file.f.is_some() {
                    return Err(unexpected("f"));
                }
                if file.game.is_some() {
                    return Err(unexpected("game"));
                }
                ProblemInstance {
                    name: file.name,
                    kind: ProblemKind::Qvi,
                    n: file.n,
                    c: file.c.ok_or_else(|| missing("C"))?,
                    k: file.k.ok_or_else(|| missing("K"))?,
                    f: Bifunction::Qvi {
                        operator: file.operator.ok_or_else(|| missing("operator"))?,
                    },
                    numerics: file.numerics,
                }
            }
            ProblemKind::Gnep => {
                for (present, what) in [
                    (file.c.is_some(), "C"),
                    (file.k.is_some(), "K"),
                    (file.f.is_some(), "f"),
                    (file.operator.is_some(), "operator"),
                ] {
                    if present {
                        return Err(unexpected(what));
                    }
                }
                let game = file.game.ok_or_else(|| missing("game"))?;
                game.validate()?;
                ProblemInstance {
                    name: file.name,
                    kind: ProblemKind::Gnep,
                    n: file.n,
                    c: game.strategy_region()?,
                    k: game.constraint_map(),
                    f: Bifunction::NikaidoIsoda { game },
                    numerics: file.numerics,
                }
            }
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl From<ProblemInstance> for InstanceFile {
    fn from(inst: ProblemInstance) -> Self {
        let mut file = InstanceFile {
            schema_version: SCHEMA_VERSION,
            name: inst.name,
            kind: inst.kind,
            n: inst.n,
            c: None,
            k: None,
            f: None,
            operator: None,
            game: None,
            numerics: inst.numerics,
        };
        match inst.f {
            Bifunction::NikaidoIsoda { game } if inst.kind == ProblemKind::Gnep => file.game = Some(game),
            Bifunction::Qvi { operator } if inst.kind == ProblemKind::Qvi => {
                file.c = Some(inst.c);
                file.k = Some(inst.k);
                file.operator = Some(operator);
            }
            f => {
                file.c = Some(inst.c);
                file.k = Some(inst.k);
                file.f = Some(f);
            }
        }
        file
    }
}

impl ProblemInstance {
    pub fn qep(name: &str, c: ConvexRegion, k: SetValuedMap, f: Bifunction, numerics: Numerics) -> Result<Self> {
        let inst = ProblemInstance {
            name: name.into(),
            kind: ProblemKind::Qep,
            n: c.dim(),
            c,
            k,
            f,
            numerics,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn qvi(name: &str, c: ConvexRegion, k: SetValuedMap, operator: Operator, numerics: Numerics) -> Result<Self> {
        let inst = ProblemInstance {
            name: name.into(),
            kind: ProblemKind::Qvi,
            n: c.dim(),
            c,
            k,
            f: Bifunction::Qvi { operator },
            numerics,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn gnep(name: &str, game: Game, numerics: Numerics) -> Result<Self> {
        game.validate()?;
        let inst = ProblemInstance {
            name: name.into(),
            kind: ProblemKind::Gnep,
            n: game.dim(),
            c: game.strategy_region()?,
            k: game.constraint_map(),
            f: Bifunction::NikaidoIsoda { game },
            numerics,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// The same problem seen as a plain QEP, e.g. `(f_T, K)` or `(f^{NI}, ∏K_ν)`.
    pub fn as_qep(&self) -> ProblemInstance {
        ProblemInstance {
            kind: ProblemKind::Qep,
            ..self.clone()
        }
    }

    pub fn operator(&self) -> Option<&Operator> {
        self.f.operator()
    }

    pub fn game(&self) -> Option<&Game> {
        self.f.game()
    }

    pub fn validate(&self) -> Result<()> {
        self.numerics.validate()?;
        check_dim(self.n, self.c.dim())?;
        self.k.validate_shape()?;
        check_dim(self.n, self.k.output_dim())?;
        if let Some(d) = self.k.input_dim() {
            check_dim(self.n, d)?;
        }
        self.f.validate()?;
        if let Some(d) = self.f.dim() {
            check_dim(self.n, d)?;
        }
        if self.c.is_empty() {
            return Err(QeqError::Schema("C must be non-empty".into()));
        }
        // inverted moving-box bounds are a modelling error; probe them on a coarse lattice of C
        let window = self.numerics.probe_radius_for(self.numerics.rho.unwrap_or(2.5));
        let per_axis = (4096f64).powf(1.0 / self.n.max(1) as f64).max(2.0);
        let h = self.numerics.grid_h.max(2.0 * window / per_axis);
        self.k.validate_on(&self.c, window, h)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Pretty-printed canonical form (the serialization of the parsed instance).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instances always serialize")
    }

    /// Hex SHA-256 of the compact canonical JSON.
    pub fn input_hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("instances always serialize");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }
}
