use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::DeployError;

pub const RESOURCE_TYPES: &[&str] = &[
    "iam.serviceAccount",
    "storage.bucket",
    "storage.object",
    "compute.instance",
    "functions.function",
    "iam.binding",
    "sourcerepo.repo",
    "registry.image",
    "logging.entries",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceAccountProps {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BucketProps {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectProps {
    pub bucket: String,
    pub name: String,
    pub content: String,
    #[serde(default = "text_plain")]
    pub content_type: String,
}

fn text_plain() -> String {
    "text/plain".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceProps {
    pub name: String,
    pub zone: String,
    pub service_account: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub container_image: Option<String>,
    #[serde(default)]
    pub serving_port: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionProps {
    pub name: String,
    pub source: String,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    #[serde(default)]
    pub require_auth: bool,
    pub runtime_account: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingProps {
    pub role: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepoProps {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageProps {
    pub path: String,
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEntriesProps {
    pub logger: String,
    #[serde(default = "info")]
    pub severity: String,
    pub messages: Vec<String>,
}

fn info() -> String {
    "INFO".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "properties")]
pub enum ResourceSpec {
    #[serde(rename = "iam.serviceAccount")]
    ServiceAccount(ServiceAccountProps),
    #[serde(rename = "storage.bucket")]
    Bucket(BucketProps),
    #[serde(rename = "storage.object")]
    Object(ObjectProps),
    #[serde(rename = "compute.instance")]
    Instance(InstanceProps),
    #[serde(rename = "functions.function")]
    Function(FunctionProps),
    #[serde(rename = "iam.binding")]
    Binding(BindingProps),
    #[serde(rename = "sourcerepo.repo")]
    Repo(RepoProps),
    #[serde(rename = "registry.image")]
    Image(ImageProps),
    #[serde(rename = "logging.entries")]
    LogEntries(LogEntriesProps),
}

impl ResourceSpec {
    pub fn type_name(&self) -> &'static str {
        match self {
            ResourceSpec::ServiceAccount(_) => "iam.serviceAccount",
            ResourceSpec::Bucket(_) => "storage.bucket",
            ResourceSpec::Object(_) => "storage.object",
            ResourceSpec::Instance(_) => "compute.instance",
            ResourceSpec::Function(_) => "functions.function",
            ResourceSpec::Binding(_) => "iam.binding",
            ResourceSpec::Repo(_) => "sourcerepo.repo",
            ResourceSpec::Image(_) => "registry.image",
            ResourceSpec::LogEntries(_) => "logging.entries",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResourceDecl {
    pub name: String,
    #[serde(flatten)]
    pub spec: ResourceSpec,
    pub depends_on: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeploymentConfig {
    pub resources: Vec<ResourceDecl>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    resources: Vec<RawDecl>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecl {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    properties: serde_yaml::Value,
    #[serde(default)]
    depends_on: Vec<String>,
}

impl DeploymentConfig {
    /// Parses and validates a rendered configuration.
    pub fn parse(text: &str) -> Result<DeploymentConfig, DeployError> {
        let raw: RawConfig = serde_yaml::from_str(text).map_err(|e| DeployError::Yaml(e.to_string()))?;
        let mut resources = Vec::with_capacity(raw.resources.len());
        for decl in raw.resources {
            if !RESOURCE_TYPES.contains(&decl.kind.as_str()) {
                return Err(DeployError::Validation(format!(
                    "resource `{}` has unknown type `{}`",
                    decl.name, decl.kind
                )));
            }
            let mut tagged = serde_yaml::Mapping::new();
            tagged.insert("type".into(), decl.kind.clone().into());
            tagged.insert("properties".into(), decl.properties);
            let spec: ResourceSpec = serde_yaml::from_value(serde_yaml::Value::Mapping(tagged))
                .map_err(|e| DeployError::Validation(format!("resource `{}` ({}): {e}", decl.name, decl.kind)))?;
            resources.push(ResourceDecl {
                name: decl.name,
                spec,
                depends_on: decl.depends_on,
            });
        }
        let config = DeploymentConfig { resources };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), DeployError> {
        let mut names = BTreeSet::new();
        for r in &self.resources {
            if r.name.is_empty() {
                return Err(DeployError::Validation("resource with empty name".into()));
            }
            if !names.insert(r.name.as_str()) {
                return Err(DeployError::Validation(format!("duplicate resource name `{}`", r.name)));
            }
        }
        for r in &self.resources {
            for d in &r.depends_on {
                if !names.contains(d.as_str()) {
                    return Err(DeployError::Validation(format!(
                        "`{}` depends on undeclared `{d}`",
                        r.name
                    )));
                }
            }
        }
        self.creation_order().map(|_| ())
    }

    /// Indices in creation order: a topological sort of `depends_on` that
    /// prefers declaration order among ready resources.
    pub fn creation_order(&self) -> Result<Vec<usize>, DeployError> {
        let index: BTreeMap<&str, usize> = self
            .resources
            .iter()
            .enumerate()
            .map(|(i, r)| (r.name.as_str(), i))
            .collect();
        let n = self.resources.len();
        let mut indegree = vec![0usize; n];
        let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, r) in self.resources.iter().enumerate() {
            let deps: BTreeSet<usize> = r
                .depends_on
                .iter()
                .filter_map(|d| index.get(d.as_str()).copied())
                .collect();
            indegree[i] = deps.len();
            for d in deps {
                dependents[d].push(i);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &j in &dependents[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() != n {
            let stuck: Vec<&str> = (0..n)
                .filter(|i| !order.contains(i))
                .map(|i| self.resources[i].name.as_str())
                .collect();
            return Err(DeployError::Validation(format!(
                "dependency cycle among {}",
                stuck.join(", ")
            )));
        }
        Ok(order)
    }
}
