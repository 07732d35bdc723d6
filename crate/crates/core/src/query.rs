//! Full conjunctive queries as hypergraphs.
//!
//! A query `q(x_1..x_k) :- S_1(..), .., S_l(..)` is stored as an ordered list
//! of variable names and an ordered list of atoms, each atom holding indices
//! into the variable list. Text form is one atom per line, e.g. `S1(x,z)`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    /// Indices into [`Query::variables`], in attribute order.
    pub vars: Vec<usize>,
}

impl Atom {
    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    variables: Vec<String>,
    atoms: Vec<Atom>,
}

/// Structural classes for which unequal-cardinality constructions exist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryShape {
    /// `S1(x), S2(y)`.
    Cartesian {
        atoms: [usize; 2],
        vars: [usize; 2],
    },
    /// `S1(x,z), S2(y,z)`; `z` is the join variable.
    BinaryJoin {
        atoms: [usize; 2],
        join_var: usize,
    },
    /// `S1(z,x1), .., Sa(z,xa)` with `a >= 3`. Two arms is a binary join.
    Star {
        center: usize,
        arms: usize,
    },
    /// `S1(x,y), S2(y,z), S3(z,x)` up to renaming.
    Triangle,
    Other,
}

impl Query {
    /// Builds a query from variable names and `(atom name, variable names)`
    /// pairs. Variable order is the order given in `variables`.
    pub fn new<S: AsRef<str>>(variables: &[S], atoms: &[(S, Vec<S>)]) -> Result<Self> {
        let variables: Vec<String> = variables.iter().map(|v| v.as_ref().to_string()).collect();
        let index: HashMap<&str, usize> = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        if index.len() != variables.len() {
            return Err(Error::InvalidQuery("duplicate variable name".into()));
        }
        let mut built = Vec::with_capacity(atoms.len());
        for (name, vars) in atoms {
            let mut idx = Vec::with_capacity(vars.len());
            for v in vars {
                let i = index.get(v.as_ref()).ok_or_else(|| {
                    Error::InvalidQuery(format!(
                        "atom {} uses undeclared variable {}",
                        name.as_ref(),
                        v.as_ref()
                    ))
                })?;
                idx.push(*i);
            }
            built.push(Atom {
                name: name.as_ref().to_string(),
                vars: idx,
            });
        }
        let q = Query {
            variables,
            atoms: built,
        };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::InvalidQuery("query has no variables".into()));
        }
        if self.atoms.is_empty() {
            return Err(Error::InvalidQuery("query has no atoms".into()));
        }
        let mut names = BTreeSet::new();
        let mut seen = vec![false; self.variables.len()];
        for atom in &self.atoms {
            if !names.insert(atom.name.as_str()) {
                return Err(Error::InvalidQuery(format!(
                    "relation {} appears twice (self-joins are not supported)",
                    atom.name
                )));
            }
            if atom.vars.is_empty() {
                return Err(Error::InvalidQuery(format!(
                    "atom {} has arity 0",
                    atom.name
                )));
            }
            let distinct: BTreeSet<_> = atom.vars.iter().collect();
            if distinct.len() != atom.vars.len() {
                return Err(Error::InvalidQuery(format!(
                    "atom {} repeats a variable",
                    atom.name
                )));
            }
            for &v in &atom.vars {
                if v >= self.variables.len() {
                    return Err(Error::InvalidQuery(format!(
                        "atom {} references variable index {v}",
                        atom.name
                    )));
                }
                seen[v] = true;
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidQuery(format!(
                "variable {} does not occur in any atom",
                self.variables[v]
            )));
        }
        Ok(())
    }

    /// Parses the line-per-atom text format. Blank lines and lines starting
    /// with `#` are ignored; variables are numbered by first occurrence.
    pub fn parse(text: &str) -> Result<Self> {
        let mut variables: Vec<String> = Vec::new();
        let mut atoms: Vec<(String, Vec<String>)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let line = line.trim_end_matches([',', '.']);
            let open = line.find('(').ok_or_else(|| err("expected '('"))?;
            if !line.ends_with(')') {
                return Err(err("expected ')' at end of atom"));
            }
            let name = line[..open].trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(err("invalid relation name"));
            }
            let body = &line[open + 1..line.len() - 1];
            let vars: Vec<String> = body.split(',').map(|v| v.trim().to_string()).collect();
            if vars
                .iter()
                .any(|v| v.is_empty() || !v.chars().all(|c| c.is_alphanumeric() || c == '_'))
            {
                return Err(err("invalid variable name"));
            }
            for v in &vars {
                if !variables.contains(v) {
                    variables.push(v.clone());
                }
            }
            atoms.push((name.to_string(), vars));
        }
        if atoms.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "no atoms".into(),
            });
        }
        Query::new(&variables, &atoms)
    }

    pub fn cartesian() -> Self {
        Query::new(&["x", "y"], &[("S1", vec!["x"]), ("S2", vec!["y"])]).unwrap()
    }

    pub fn binary_join() -> Self {
        Query::new(
            &["x", "y", "z"],
            &[("S1", vec!["x", "z"]), ("S2", vec!["y", "z"])],
        )
        .unwrap()
    }

    /// `q(z,x1..xa) :- S1(z,x1), .., Sa(z,xa)`.
    pub fn star(arms: usize) -> Self {
        assert!(arms >= 1, "star query needs at least one arm");
        let mut vars = vec!["z".to_string()];
        vars.extend((1..=arms).map(|i| format!("x{i}")));
        let atoms: Vec<(String, Vec<String>)> = (1..=arms)
            .map(|i| (format!("S{i}"), vec!["z".to_string(), format!("x{i}")]))
            .collect();
        Query::new(&vars, &atoms).unwrap()
    }

    pub fn triangle() -> Self {
        Query::new(
            &["x", "y", "z"],
            &[
                ("S1", vec!["x", "y"]),
                ("S2", vec!["y", "z"]),
                ("S3", vec!["z", "x"]),
            ],
        )
        .unwrap()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Number of variables `k`.
    pub fn k(&self) -> usize {
        self.variables.len()
    }

    /// Number of atoms `l`.
    pub fn l(&self) -> usize {
        self.atoms.len()
    }

    pub fn arities(&self) -> Vec<usize> {
        self.atoms.iter().map(Atom::arity).collect()
    }

    pub fn total_arity(&self) -> usize {
        self.atoms.iter().map(Atom::arity).sum()
    }

    pub fn atom_index(&self, name: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.name == name)
    }

    /// Atoms containing variable `var`.
    pub fn atoms_of(&self, var: usize) -> impl Iterator<Item = usize> + '_ {
        self.atoms
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.contains(var))
            .map(|(j, _)| j)
    }

    pub fn shape(&self) -> QueryShape {
        let arities = self.arities();
        if self.l() == 2 && self.k() == 2 && arities == [1, 1] {
            return QueryShape::Cartesian {
                atoms: [0, 1],
                vars: [self.atoms[0].vars[0], self.atoms[1].vars[0]],
            };
        }
        if arities.iter().all(|&r| r == 2) && self.l() >= 2 && self.k() == self.l() + 1 {
            // every atom shares one centre variable; each other variable is private
            let common: Vec<usize> = (0..self.k())
                .filter(|&v| self.atoms.iter().all(|a| a.contains(v)))
                .collect();
            if common.len() == 1 {
                let center = common[0];
                let private_ok = (0..self.k())
                    .filter(|&v| v != center)
                    .all(|v| self.atoms_of(v).count() == 1);
                if private_ok {
                    return if self.l() == 2 {
                        QueryShape::BinaryJoin {
                            atoms: [0, 1],
                            join_var: center,
                        }
                    } else {
                        QueryShape::Star {
                            center,
                            arms: self.l(),
                        }
                    };
                }
            }
        }
        if self.l() == 3
            && self.k() == 3
            && arities == [2, 2, 2]
            && (0..3).all(|v| self.atoms_of(v).count() == 2)
        {
            return QueryShape::Triangle;
        }
        QueryShape::Other
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for atom in &self.atoms {
            let vars: Vec<&str> = atom
                .vars
                .iter()
                .map(|&v| self.variables[v].as_str())
                .collect();
            writeln!(f, "{}({})", atom.name, vars.join(","))?;
        }
        Ok(())
    }
}
