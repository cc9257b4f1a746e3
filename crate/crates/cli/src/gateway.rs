use std::path::Path;

use cxnprobe::gateway::{CachedGateway, Gateway, GatewayClient, MockGateway, MockMode};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum GatewaySpec {
    Mock(MockMode),
    Spawn(String),
    Tcp(String),
}

impl std::str::FromStr for GatewaySpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("bad gateway spec {s:?}"));
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        match (kind, rest) {
            ("mock", None) | ("mock", Some("hashed")) => Ok(GatewaySpec::Mock(MockMode::Hashed)),
            ("mock", Some("uniform")) => Ok(GatewaySpec::Mock(MockMode::Uniform)),
            ("mock", Some(m)) => {
                let p: f64 = m
                    .strip_prefix("peaked=")
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(bad)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad());
                }
                Ok(GatewaySpec::Mock(MockMode::Peaked(p)))
            }
            ("spawn", Some(cmd)) if !cmd.trim().is_empty() => Ok(GatewaySpec::Spawn(cmd.into())),
            ("tcp", Some(addr)) if addr.contains(':') => Ok(GatewaySpec::Tcp(addr.into())),
            _ => Err(bad()),
        }
    }
}

impl GatewaySpec {
    pub fn connect(&self, seed: u64, in_flight: usize) -> Result<Box<dyn Gateway>, CliError> {
        Ok(match self {
            GatewaySpec::Mock(mode) => Box::new(MockGateway::with_mode(seed, *mode)),
            GatewaySpec::Spawn(cmd) => {
                Box::new(GatewayClient::spawn(cmd)?.with_max_in_flight(in_flight))
            }
            GatewaySpec::Tcp(addr) => {
                Box::new(GatewayClient::connect_tcp(addr)?.with_max_in_flight(in_flight))
            }
        })
    }
}

/// The run's gateway, cached on disk when `cache_dir` is set.
pub fn open(
    spec: &str,
    seed: u64,
    in_flight: usize,
    cache_dir: Option<&Path>,
) -> Result<CachedGateway<Box<dyn Gateway>>, CliError> {
    let inner = spec.parse::<GatewaySpec>()?.connect(seed, in_flight)?;
    Ok(match cache_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
            CachedGateway::with_store(inner, dir)?
        }
        None => CachedGateway::new(inner)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse() {
        let p = |s: &str| s.parse::<GatewaySpec>();
        assert_eq!(p("mock").unwrap(), GatewaySpec::Mock(MockMode::Hashed));
        assert_eq!(
            p("mock:uniform").unwrap(),
            GatewaySpec::Mock(MockMode::Uniform)
        );
        assert_eq!(
            p("mock:peaked=0.9").unwrap(),
            GatewaySpec::Mock(MockMode::Peaked(0.9))
        );
        assert_eq!(
            p("spawn:python -m adapter").unwrap(),
            GatewaySpec::Spawn("python -m adapter".into())
        );
        assert_eq!(
            p("tcp:localhost:7000").unwrap(),
            GatewaySpec::Tcp("localhost:7000".into())
        );
        for bad in [
            "",
            "mock:peaked=2",
            "mock:x",
            "spawn:",
            "tcp:nohost",
            "grpc:x",
        ] {
            assert!(matches!(p(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn unreachable_adapter_is_a_gateway_error() {
        let err = open("spawn:/nonexistent/adapter-binary", 0, 1, None)
            .err()
            .unwrap();
        assert!(matches!(err, CliError::Gateway(_)), "{err:?}");
    }
}
