//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "thunder",
    version,
    about = "Play cloud-security CTF levels against a local emulated cloud"
)]
pub struct Cli {
    /// API address (host:port or URL). Overrides EMUCLOUD_ADDR and the config file.
    #[arg(long, global = true)]
    pub addr: Option<String>,
    /// Project to act on. Overrides the config file.
    #[arg(long, global = true)]
    pub project: Option<String>,
    /// Print raw API response bodies.
    #[arg(long, global = true)]
    pub json: bool,
    /// Bearer token for this call instead of the active credential.
    #[arg(long, global = true)]
    pub token: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the emulated cloud's API server.
    Serve(ServeArgs),
    /// Deploy a level into the project.
    Create {
        /// Level reference, e.g. thunder/a1openbucket.
        level: String,
        /// Where to write the handout key file (default: ./<account>.json).
        #[arg(long)]
        key_out: Option<PathBuf>,
    },
    /// Tear down the active level.
    Destroy,
    /// List the available levels.
    ListLevels {
        #[arg(long)]
        namespace: Option<String>,
    },
    /// Show a level's introduction and writeup.
    ShowLevel { level: String },
    /// Check a flag for the active (or given) level.
    Submit {
        flag: String,
        #[arg(long)]
        level: Option<String>,
    },
    /// Show solved levels, submissions and hint counts for the project.
    Progress,
    /// Show, reveal or export a level's hints.
    #[command(subcommand)]
    Hints(HintsCmd),
    /// Show or change CLI settings.
    #[command(subcommand)]
    Config(ConfigCmd),
    /// Manage credentials and mint tokens.
    #[command(subcommand)]
    Auth(AuthCmd),
    /// Inspect and change the project's IAM policy.
    #[command(subcommand)]
    Iam(IamCmd),
    /// Storage buckets.
    #[command(subcommand)]
    Buckets(BucketsCmd),
    /// Storage objects.
    #[command(subcommand)]
    Objects(ObjectsCmd),
    /// Compute instances.
    #[command(subcommand)]
    Instances(InstancesCmd),
    /// Local ssh key pairs.
    #[command(subcommand)]
    Keys(KeysCmd),
    /// Open a session on an instance with a private key.
    Ssh {
        instance: String,
        /// Private key file.
        #[arg(long)]
        key: PathBuf,
        /// Run `token` or `metadata <path>` in the session.
        #[arg(long)]
        exec: Option<String>,
    },
    /// Cloud functions.
    #[command(subcommand)]
    Functions(FunctionsCmd),
    /// Log entries.
    #[command(subcommand)]
    Logs(LogsCmd),
    /// Source repositories.
    #[command(subcommand)]
    Repo(RepoCmd),
    /// Container images.
    #[command(subcommand)]
    Images(ImagesCmd),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Metadata server mode: default or strict-header.
    #[arg(long, default_value = "default")]
    pub metadata_mode: String,
}

#[derive(Debug, Subcommand)]
pub enum HintsCmd {
    /// Show the hints revealed so far.
    Show {
        #[arg(long)]
        level: Option<String>,
    },
    /// Reveal the next hint.
    Reveal {
        #[arg(long)]
        level: Option<String>,
    },
    /// Write the static hint slideshow site for every level.
    Site {
        #[arg(long, default_value = "site")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConfigCmd {
    /// Print the configuration (the token is masked).
    Show,
    /// Set addr, project or output (text|json).
    Set { key: String, value: String },
}

#[derive(Debug, Subcommand)]
pub enum AuthCmd {
    /// Exchange a service account key file for an access token and keep it.
    ActivateKey { file: PathBuf },
    /// Keep an access token obtained some other way.
    ActivateToken { token: String },
    /// Print the active access token.
    PrintToken,
    /// Mint an identity token for an audience (a function URL).
    IdentityToken { audience: String },
}

#[derive(Debug, Subcommand)]
pub enum IamCmd {
    /// List which permissions the active credential holds on the project.
    TestPermissions {
        #[arg(long = "permission")]
        permissions: Vec<String>,
    },
    /// Print the project's IAM policy.
    GetPolicy,
    /// Replace the project's IAM policy from a JSON file (as printed by get-policy --json).
    SetPolicy { file: PathBuf },
    /// List the role catalog.
    Roles,
}

#[derive(Debug, Subcommand)]
pub enum BucketsCmd {
    /// List the project's buckets.
    List,
}

#[derive(Debug, Subcommand)]
pub enum ObjectsCmd {
    /// List a bucket's objects.
    List { bucket: String },
    /// Write an object's bytes to stdout.
    Cat { bucket: String, name: String },
}

#[derive(Debug, Subcommand)]
pub enum InstancesCmd {
    /// List instances with their accounts and metadata.
    List,
    /// Append `user:key` to the instance's ssh-keys metadata.
    AddSshKey {
        instance: String,
        #[arg(long)]
        user: String,
        /// Public key file.
        #[arg(long)]
        key: PathBuf,
    },
    /// Send a request to the instance's web server.
    Browse {
        instance: String,
        #[arg(default_value = "/")]
        path: String,
        /// Query parameter, `name=value`.
        #[arg(long = "param")]
        params: Vec<String>,
        /// Request header, `Name: value`.
        #[arg(long = "header")]
        headers: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum KeysCmd {
    /// Write a new private key to FILE and its public half to FILE.pub.
    Generate { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum FunctionsCmd {
    /// List the project's functions.
    List,
    /// Show a function's URL, runtime account and environment.
    Describe { name: String },
    /// Print a function's source.
    Source { name: String },
    /// Replace a function's source.
    Deploy {
        name: String,
        #[arg(long)]
        source: PathBuf,
    },
    /// Invoke a function through its URL.
    Call {
        name: String,
        /// Parameter, `name=value`.
        #[arg(long = "param")]
        params: Vec<String>,
        /// Identity token to present instead of the active credential.
        #[arg(long)]
        id_token: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum LogsCmd {
    /// Read the project's log entries, optionally for one logger.
    Read {
        #[arg(long)]
        logger: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RepoCmd {
    /// List source repositories.
    List,
    /// List a repository's commits, newest first.
    Log { repo: String },
    /// Show a commit, or one file's contents at that commit.
    Show {
        repo: String,
        commit: String,
        path: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ImagesCmd {
    /// List container images.
    List,
    /// Download an image (`name:tag` or `project/name:tag`).
    Pull {
        image: String,
        /// Unpack the files into this directory instead of printing the archive.
        #[arg(long)]
        extract: Option<PathBuf>,
    },
}
