//! Profile CSV schema: optional `# key=value` preamble (`id`, `class`, `step_seconds`),
//! then the required header `t_s,p_dem_kw,spa` and one row per step.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{validate_samples, ClassLabel, LoadProfile, ProfileError, ProfileSet, Sample};

const HEADER: [&str; 3] = ["t_s", "p_dem_kw", "spa"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProfileError + '_ {
    move |source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_csv(profile: &LoadProfile, path: &Path) -> Result<(), ProfileError> {
    let mut out = String::new();
    out.push_str(&format!("# id={}\n", profile.id));
    out.push_str(&format!("# class={}\n", profile.class_label));
    out.push_str(&format!("# step_seconds={}\n", profile.step_seconds));
    out.push_str(&HEADER.join(","));
    out.push('\n');
    for (i, s) in profile.samples.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            i as f64 * profile.step_seconds,
            s.p_dem_kw,
            u8::from(s.spa)
        ));
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

pub fn read_csv(path: &Path) -> Result<LoadProfile, ProfileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse(&text, &stem)
}

fn parse(text: &str, default_id: &str) -> Result<LoadProfile, ProfileError> {
    let mut id = default_id.to_string();
    let mut class: Option<ClassLabel> = None;
    let mut step_seconds: Option<f64> = None;
    for (n, line) in text.lines().enumerate() {
        let Some(meta) = line.trim_start().strip_prefix('#') else {
            continue;
        };
        let line_no = n as u64 + 1;
        let Some((key, value)) = meta.split_once('=') else {
            continue;
        };
        let value = value.trim();
        match key.trim() {
            "id" => id = value.to_string(),
            "class" => {
                class = Some(value.parse().map_err(|msg| ProfileError::Parse { line: line_no, msg })?)
            }
            "step_seconds" => {
                let v: f64 = value.parse().map_err(|_| ProfileError::Parse {
                    line: line_no,
                    msg: format!("bad step_seconds '{value}'"),
                })?;
                step_seconds = Some(v);
            }
            _ => {}
        }
    }

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| ProfileError::Parse {
        line: e.position().map_or(1, |p| p.line()),
        msg: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(ProfileError::Parse {
            line: header.position().map_or(1, |p| p.line()),
            msg: format!("expected header '{}', got '{}'", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut samples = Vec::new();
    let mut times = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ProfileError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64, ProfileError> {
            rec[i].parse::<f64>().map_err(|_| ProfileError::Parse {
                line,
                msg: format!("column {} is not a number: '{}'", HEADER[i], &rec[i]),
            })
        };
        let t = field(0)?;
        let p = field(1)?;
        if !(p >= 0.0) {
            return Err(ProfileError::NegativeDemand { line, value: p });
        }
        let spa = match &rec[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(ProfileError::Parse {
                    line,
                    msg: format!("spa must be 0 or 1, got '{other}'"),
                })
            }
        };
        times.push(t);
        lines.push(line);
        samples.push(Sample { p_dem_kw: p, spa });
    }
    if samples.is_empty() {
        return Err(ProfileError::Empty);
    }
    validate_samples(&samples, |i| lines[i])?;

    let dt = match step_seconds {
        Some(dt) => dt,
        None if times.len() >= 2 => times[1] - times[0],
        None => 60.0,
    };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ProfileError::Parse {
            line: lines[0],
            msg: format!("non-positive step length {dt}"),
        });
    }
    for (i, &t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dt;
        if (t - expected).abs() > 1e-6 * dt.max(1.0) {
            return Err(ProfileError::Parse {
                line: lines[i],
                msg: format!("t_s {t} breaks uniform spacing of {dt} s"),
            });
        }
    }

    let class_label = class.unwrap_or_else(|| {
        let sailing: Vec<f64> = samples.iter().take_while(|s| !s.spa).map(|s| s.p_dem_kw).collect();
        let mean = sailing.iter().sum::<f64>() / sailing.len().max(1) as f64;
        ClassLabel::from_load_fraction(mean / 4370.0)
    });
    Ok(LoadProfile {
        id,
        samples,
        step_seconds: dt,
        class_label,
    })
}

/// Reads every `*.csv` in a directory, sorted by file name.
pub fn read_dir(dir: &Path) -> Result<Vec<LoadProfile>, ProfileError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_csv(p)).collect()
}

/// Writes `train/` and `validation/` subdirectories plus an `index.csv`.
pub fn write_set(set: &ProfileSet, dir: &Path) -> Result<(), ProfileError> {
    let mut index = String::from("id,split,class,sailing_steps,port_steps\n");
    for (split, profiles) in [("train", &set.train), ("validation", &set.validation)] {
        let sub = dir.join(split);
        fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        for p in profiles.iter() {
            write_csv(p, &sub.join(format!("{}.csv", p.id)))?;
            index.push_str(&format!(
                "{},{},{},{},{}\n",
                p.id,
                split,
                p.class_label,
                p.sailing_len(),
                p.port().len()
            ));
        }
    }
    let path = dir.join("index.csv");
    fs::write(&path, index).map_err(io_err(&path))
}

/// Loads a directory written by [`write_set`].
pub fn read_set(dir: &Path, seed: u64) -> Result<ProfileSet, ProfileError> {
    Ok(ProfileSet {
        train: read_dir(&dir.join("train"))?,
        validation: read_dir(&dir.join("validation"))?,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{generate, GeneratorConfig};

    #[test]
    fn generated_profile_roundtrips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let set = generate(9, 10, &GeneratorConfig::default()).unwrap();
        for p in set.all() {
            let path = dir.path().join(format!("{}.csv", p.id));
            write_csv(p, &path).unwrap();
            assert_eq!(&read_csv(&path).unwrap(), p);
        }
    }

    #[test]
    fn negative_demand_names_the_row() {
        let text = "t_s,p_dem_kw,spa\n0,10,0\n60,-5,0\n120,3,1\n";
        match parse(text, "x") {
            Err(ProfileError::NegativeDemand { line, value }) => {
                assert_eq!(line, 3);
                assert_eq!(value, -5.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_is_empty_profile() {
        let err = parse("t_s,p_dem_kw,spa\n", "x").unwrap_err();
        assert!(matches!(err, ProfileError::Empty));
        assert_eq!(err.to_string(), "empty profile");
    }

    #[test]
    fn malformed_rows_rejected_with_line() {
        let err = parse("t_s,p_dem_kw,spa\n0,abc,0\n", "x").unwrap_err();
        assert!(matches!(err, ProfileError::Parse { line: 2, .. }), "{err:?}");
        let err = parse("t_s,p_dem_kw,spa\n0,1,2\n", "x").unwrap_err();
        assert!(matches!(err, ProfileError::Parse { line: 2, .. }));
        let err = parse("time,p,spa\n0,1,0\n", "x").unwrap_err();
        assert!(matches!(err, ProfileError::Parse { line: 1, .. }));
        let err = parse("t_s,p_dem_kw,spa\n0,1,0\n60,1,1\n120,1,0\n", "x").unwrap_err();
        assert!(matches!(err, ProfileError::SpaPattern { line: 4 }));
    }

    #[test]
    fn metadata_is_optional() {
        let p = parse("t_s,p_dem_kw,spa\n0,100,0\n30,200,0\n60,50,1\n", "voyage7").unwrap();
        assert_eq!(p.id, "voyage7");
        assert_eq!(p.step_seconds, 30.0);
        assert_eq!(p.class_label, ClassLabel::Low);
        assert_eq!(p.sailing_len(), 2);
    }

    #[test]
    fn set_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let set = generate(2, 8, &GeneratorConfig::default()).unwrap();
        write_set(&set, dir.path()).unwrap();
        let back = read_set(dir.path(), 2).unwrap();
        let mut train = set.train.clone();
        train.sort_by(|a, b| a.id.cmp(&b.id));
        assert_eq!(back.train, train);
        assert_eq!(back.validation.len(), set.validation.len());
    }
}
