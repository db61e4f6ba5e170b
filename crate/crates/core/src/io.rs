//! File formats: CMDP and reward-class JSON in nested `[s][a]` order,
//! demonstrations as JSON lines.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cmdp::{sa_index, Cmdp, OccupancyMeasure};
use crate::error::{Error, Result};
use crate::irl::{Demonstrations, NormKind, RewardClass};
use crate::numerics::Matrix;

/// On-disk CMDP. `p` is `[s][a][s']`, `psi` is `[i][s][a]`, `r` is `[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdpFile {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub nu0: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Psi", default)]
    pub psi: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<Vec<f64>>>,
}

/// On-disk reward class: `phi` is `[j][s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardClassFile {
    pub phi: Vec<Vec<Vec<f64>>>,
    pub norm: NormKind,
    pub radius: f64,
}

fn check_len<T>(v: &[T], want: usize, what: &str) -> Result<()> {
    if v.len() != want {
        return Err(Error::Dimension(format!("{what} has length {}, expected {want}", v.len())));
    }
    Ok(())
}

/// `[s][a]` nested table to action-major flat vector.
pub fn flatten_sa(table: &[Vec<f64>], n: usize, m: usize, what: &str) -> Result<Vec<f64>> {
    check_len(table, n, what)?;
    let mut out = vec![0.0; n * m];
    for (s, row) in table.iter().enumerate() {
        check_len(row, m, &format!("{what}[{s}]"))?;
        for (a, &v) in row.iter().enumerate() {
            out[sa_index(n, s, a)] = v;
        }
    }
    Ok(out)
}

/// Action-major flat vector to `[s][a]` nested table.
pub fn nest_sa(flat: &[f64], n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|s| (0..m).map(|a| flat[sa_index(n, s, a)]).collect())
        .collect()
}

impl CmdpFile {
    pub fn into_cmdp(self) -> Result<Cmdp> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(Error::Invalid("n and m must be positive".into()));
        }
        check_len(&self.p, n, "P")?;
        let mut transition = Matrix::zeros(n * m, n);
        for (s, per_action) in self.p.iter().enumerate() {
            check_len(per_action, m, &format!("P[{s}]"))?;
            for (a, row) in per_action.iter().enumerate() {
                check_len(row, n, &format!("P[{s}][{a}]"))?;
                transition.row_mut(sa_index(n, s, a)).copy_from_slice(row);
            }
        }
        let k = self.psi.len();
        check_len(&self.b, k, "b")?;
        let mut psi = Matrix::zeros(n * m, k);
        for (i, table) in self.psi.iter().enumerate() {
            let col = flatten_sa(table, n, m, &format!("Psi[{i}]"))?;
            for (row, v) in col.into_iter().enumerate() {
                psi[(row, i)] = v;
            }
        }
        let reward = self.r.as_deref().map(|r| flatten_sa(r, n, m, "r")).transpose()?;
        Cmdp::new(n, m, self.gamma, self.nu0, transition, psi, self.b, reward)
    }

    pub fn from_cmdp(cmdp: &Cmdp) -> Self {
        let (n, m) = (cmdp.n(), cmdp.m());
        let p = (0..n)
            .map(|s| (0..m).map(|a| cmdp.transition().row(sa_index(n, s, a)).to_vec()).collect())
            .collect();
        let psi = (0..cmdp.k())
            .map(|i| nest_sa(&cmdp.psi().column(i), n, m))
            .collect();
        Self {
            n,
            m,
            gamma: cmdp.gamma(),
            nu0: cmdp.nu0().to_vec(),
            p,
            psi,
            b: cmdp.b().to_vec(),
            r: cmdp.reward().map(|r| nest_sa(r, n, m)),
        }
    }
}

impl RewardClassFile {
    pub fn into_class(self, n: usize, m: usize) -> Result<RewardClass> {
        let d = self.phi.len();
        if d == 0 {
            return Err(Error::Invalid("reward class has no features".into()));
        }
        let mut phi = Matrix::zeros(n * m, d);
        for (j, table) in self.phi.iter().enumerate() {
            for (row, v) in flatten_sa(table, n, m, &format!("phi[{j}]"))?.into_iter().enumerate() {
                phi[(row, j)] = v;
            }
        }
        RewardClass::new(phi, self.norm, self.radius)
    }

    pub fn from_class(class: &RewardClass, n: usize, m: usize) -> Self {
        Self {
            phi: (0..class.dim()).map(|j| nest_sa(&class.phi().column(j), n, m)).collect(),
            norm: class.norm(),
            radius: class.radius(),
        }
    }
}

fn open_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| open_error(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_cmdp(path: &Path) -> Result<Cmdp> {
    read_json::<CmdpFile>(path)?.into_cmdp()
}

pub fn save_cmdp(path: &Path, cmdp: &Cmdp) -> Result<()> {
    write_json(path, &CmdpFile::from_cmdp(cmdp))
}

pub fn load_reward_class(path: &Path, n: usize, m: usize) -> Result<RewardClass> {
    read_json::<RewardClassFile>(path)?.into_class(n, m)
}

pub fn save_reward_class(path: &Path, class: &RewardClass, n: usize, m: usize) -> Result<()> {
    write_json(path, &RewardClassFile::from_class(class, n, m))
}

/// Reward as a flat action-major vector (`[s][a]` nested or flat accepted).
pub fn load_reward(path: &Path, n: usize, m: usize) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum RewardFile {
        Nested(Vec<Vec<f64>>),
        Flat(Vec<f64>),
    }
    match read_json::<RewardFile>(path)? {
        RewardFile::Nested(t) => flatten_sa(&t, n, m, "reward"),
        RewardFile::Flat(v) => {
            check_len(&v, n * m, "reward")?;
            Ok(v)
        }
    }
}

/// Occupancy stored as `[s][a]`.
pub fn load_occupancy(path: &Path, n: usize, m: usize) -> Result<OccupancyMeasure> {
    let table: Vec<Vec<f64>> = read_json(path)?;
    OccupancyMeasure::new(n, m, flatten_sa(&table, n, m, "occupancy")?)
}

/// One trajectory per line, `[[s,a],...]`; blank lines are skipped.
pub fn read_demonstrations(path: &Path, n: usize, m: usize) -> Result<Demonstrations> {
    let file = fs::File::open(path).map_err(|e| open_error(path, e))?;
    let mut trajectories = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let traj: Vec<(usize, usize)> = serde_json::from_str(&line)
            .map_err(|e| Error::Invalid(format!("demonstrations line {}: {e}", i + 1)))?;
        trajectories.push(traj);
    }
    Demonstrations::new(trajectories, n, m)
}

pub fn write_demonstrations(path: &Path, demos: &Demonstrations) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for traj in demos.trajectories() {
        serde_json::to_writer(&mut out, traj)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Applies `key=value` overrides to a serializable config. Keys are dotted
/// paths into the JSON form; values are parsed as JSON, falling back to a
/// plain string.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(config: &T, overrides: &[String]) -> Result<T> {
    let mut value = serde_json::to_value(config)?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("override '{item}' is not key=value")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut slot = &mut value;
        for part in key.split('.') {
            slot = match slot {
                serde_json::Value::Object(map) if map.contains_key(part) => map.get_mut(part).unwrap(),
                serde_json::Value::Array(items) => part
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| items.get_mut(i))
                    .ok_or_else(|| Error::Invalid(format!("override key '{key}': bad index '{part}'")))?,
                _ => return Err(Error::Invalid(format!("unknown config key '{key}'"))),
            };
        }
        *slot = parsed;
    }
    serde_json::from_value(value).map_err(|e| Error::Invalid(format!("override produced invalid config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::tests::random_cmdp;
    use rand::SeedableRng;

    #[test]
    fn cmdp_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let c = random_cmdp(&mut rng, 3, 2, 2).with_reward(Some(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        save_cmdp(&path, &c).unwrap();
        let back = load_cmdp(&path).unwrap();
        assert_eq!(back.transition(), c.transition());
        assert_eq!(back.psi(), c.psi());
        assert_eq!(back.reward(), c.reward());
        // [s][a] order in the file: r[1][0] is state 1, action 0.
        let file: CmdpFile = read_json(&path).unwrap();
        assert_eq!(file.r.unwrap()[1][0], 1.0);
    }

    #[test]
    fn malformed_json_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\"n\": 2,\n \"m\": }").unwrap();
        let msg = load_cmdp(&path).unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn dimension_mismatch() {
        let file = CmdpFile {
            n: 1,
            m: 2,
            gamma: 0.9,
            nu0: vec![1.0],
            p: vec![vec![vec![1.0]]],
            psi: vec![],
            b: vec![],
            r: None,
        };
        assert!(matches!(file.into_cmdp(), Err(Error::Dimension(_))));
    }

    #[test]
    fn demonstrations_round_trip() {
        let d = Demonstrations::new(vec![vec![(0, 1), (1, 0)], vec![(1, 1), (0, 0)]], 2, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_demonstrations(&path, &d).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().next(), Some("[[0,1],[1,0]]"));
        assert_eq!(read_demonstrations(&path, 2, 2).unwrap(), d);
    }

    #[test]
    fn overrides() {
        use crate::experiments::GridworldConfig;
        let cfg = GridworldConfig::default();
        let out = apply_overrides(
            &cfg,
            &["gamma=0.8".into(), "b=[0.1,0.2]".into(), "reward_cells.0.value=2".into()],
        )
        .unwrap();
        assert_eq!(out.gamma, 0.8);
        assert_eq!(out.b, vec![0.1, 0.2]);
        assert_eq!(out.reward_cells[0].value, 2.0);
        assert!(apply_overrides(&cfg, &["nope=1".into()]).is_err());
        assert!(apply_overrides(&cfg, &["gamma".into()]).is_err());
        assert!(apply_overrides(&cfg, &["gamma=\"x\"".into()]).is_err());
    }
}
