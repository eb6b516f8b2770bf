//! Flat `key=value` config files. Lines may carry `#` comments; keys mirror
//! the corresponding struct field names. Unknown keys are rejected by name
//! so typos surface immediately.

use std::str::FromStr;

use qrs_core::bench::{ExperimentConfig, Method};
use qrs_core::datagen::{CovariateLaw, ErrorLaw, SyntheticSpec};

use crate::{Failure, EXIT_USAGE};

fn usage(message: String) -> Failure {
    Failure { code: EXIT_USAGE, message }
}

pub(crate) fn parse_kv(text: &str) -> Result<Vec<(String, String)>, Failure> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(usage(format!(
                "config line {}: expected key=value, got {line:?}",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(usage(format!("config key {key:?} given more than once")));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_value<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T, Failure> {
    value
        .parse::<T>()
        .map_err(|_| usage(format!("config key {key}: expected {expected}, got {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, Failure> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(usage(format!("config key {key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<Vec<T>, Failure> {
    value
        .split(',')
        .map(|v| parse_value(key, v.trim(), expected))
        .collect()
}

fn parse_enum<T>(key: &str, value: &str) -> Result<T, Failure>
where
    T: FromStr<Err = qrs_core::Error>,
{
    T::from_str(value).map_err(|e| usage(format!("config key {key}: {e}")))
}

pub(crate) fn parse_simulate_config(text: &str) -> Result<SyntheticSpec, Failure> {
    let mut n_rows = None;
    let mut p: usize = 7;
    let mut beta_true: Option<Vec<f64>> = None;
    let mut covariate_law = CovariateLaw::MvNormal;
    let mut error_law = ErrorLaw::Normal;
    let mut tau = 0.5;
    let mut seed = 0u64;
    let mut add_intercept = false;

    for (key, value) in parse_kv(text)? {
        match key.as_str() {
            "n_rows" => n_rows = Some(parse_value(&key, &value, "an integer")?),
            "p" => p = parse_value(&key, &value, "an integer")?,
            "beta_true" => beta_true = Some(parse_list(&key, &value, "a number")?),
            "covariate_law" => covariate_law = parse_enum(&key, &value)?,
            "error_law" => error_law = parse_enum(&key, &value)?,
            "tau" => tau = parse_value(&key, &value, "a number")?,
            "seed" => seed = parse_value(&key, &value, "an integer")?,
            "add_intercept" => add_intercept = parse_bool(&key, &value)?,
            other => return Err(usage(format!("unknown config key {other:?}"))),
        }
    }

    let n_rows = n_rows.ok_or_else(|| usage("config key n_rows is required".into()))?;
    Ok(SyntheticSpec {
        n_rows,
        covariate_law,
        error_law,
        tau,
        beta_true: beta_true.unwrap_or_else(|| vec![1.0; p]),
        seed,
        add_intercept,
    })
}

pub(crate) fn parse_bench_config(text: &str) -> Result<ExperimentConfig, Failure> {
    let mut config = ExperimentConfig::default();
    for (key, value) in parse_kv(text)? {
        match key.as_str() {
            "n_rows" => config.n_rows = parse_value(&key, &value, "an integer")?,
            "p" => config.p = parse_value(&key, &value, "an integer")?,
            "covariate_law" => config.covariate_law = parse_enum(&key, &value)?,
            "error_law" => config.error_law = parse_enum(&key, &value)?,
            "taus" => config.taus = parse_list(&key, &value, "a number")?,
            "n0" => config.n0 = parse_value(&key, &value, "an integer")?,
            "n" => config.n = parse_value(&key, &value, "an integer")?,
            "bs" => config.bs = parse_list(&key, &value, "an integer")?,
            "replicates" => config.replicates = parse_value(&key, &value, "an integer")?,
            "methods" => {
                config.methods = value
                    .split(',')
                    .map(|m| parse_enum::<Method>(&key, m.trim()))
                    .collect::<Result<_, _>>()?
            }
            "base_seed" => config.base_seed = parse_value(&key, &value, "an integer")?,
            "level" => config.level = parse_value(&key, &value, "a number")?,
            "full_data_cap" => config.full_data_cap = parse_value(&key, &value, "an integer")?,
            other => return Err(usage(format!("unknown config key {other:?}"))),
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_lists() {
        let text = "\
# full line comment
n_rows = 2000   # trailing comment
taus = 0.5, 0.75

methods = uniform, lopt
bs = 5,10
";
        let config = parse_bench_config(text).unwrap();
        assert_eq!(config.n_rows, 2000);
        assert_eq!(config.taus, vec![0.5, 0.75]);
        assert_eq!(config.methods, vec![Method::Uniform, Method::Lopt]);
        assert_eq!(config.bs, vec![5, 10]);
    }

    #[test]
    fn names_the_unknown_key() {
        let err = parse_bench_config("n_rowz = 10\n").unwrap_err();
        assert_eq!(err.code, EXIT_USAGE);
        assert!(err.message.contains("n_rowz"), "{}", err.message);
    }

    #[test]
    fn rejects_duplicates_and_bad_values() {
        assert!(parse_bench_config("n = 5\nn = 6\n").is_err());
        assert!(parse_bench_config("replicates = soon\n").is_err());
        assert!(parse_kv("just a line\n").is_err());
    }

    #[test]
    fn simulate_defaults_and_required_fields() {
        let err = parse_simulate_config("p = 3\n").unwrap_err();
        assert!(err.message.contains("n_rows"));
        let spec = parse_simulate_config("n_rows = 50\np = 3\nerror_law = zero\n").unwrap();
        assert_eq!(spec.beta_true, vec![1.0; 3]);
        assert_eq!(spec.error_law, ErrorLaw::Zero);
    }
}
