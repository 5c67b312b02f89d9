//! The authorization matrix: every gated endpoint against every kind of
//! caller.

use std::collections::BTreeMap;

use serde_json::json;
use thunder_core::clock::{ManualClock, Timestamp};
use thunder_core::handler::Request;
use thunder_core::iam::{perms, Binding, RoleCatalog};
use thunder_core::services::compute::Instance;
use thunder_core::{route, ApiRequest, Emulator};

pub const P: &str = "proj-matrix1";

pub const ALL: &[&str] = &[
    perms::STORAGE_BUCKETS_LIST,
    perms::STORAGE_OBJECTS_LIST,
    perms::STORAGE_OBJECTS_GET,
    perms::STORAGE_OBJECTS_CREATE,
    perms::COMPUTE_INSTANCES_LIST,
    perms::COMPUTE_INSTANCES_SET_METADATA,
    perms::LOGGING_ENTRIES_LIST,
    perms::FUNCTIONS_LIST,
    perms::FUNCTIONS_GET,
    perms::FUNCTIONS_SOURCE_GET,
    perms::FUNCTIONS_UPDATE,
    perms::REPOS_LIST,
    perms::REPOS_GET,
    perms::IMAGES_LIST,
    perms::IMAGES_PULL,
    perms::GET_IAM_POLICY,
    perms::SET_IAM_POLICY,
];

pub fn role_of(perm: &str) -> String {
    format!("roles/only.{}", perm.replace('.', "-"))
}

pub fn catalog() -> RoleCatalog {
    let yaml: String = ALL
        .iter()
        .map(|p| format!("- role: {}\n  permissions: [{p}]\n", role_of(p)))
        .collect();
    RoleCatalog::from_yaml(&yaml).unwrap()
}

pub struct Fixture {
    pub emu: Emulator,
    pub authorized: String,
    pub unauthorized: String,
    pub identity: String,
}

/// A project with one of everything. `authorized` holds only `perm`;
/// `unauthorized` holds every other permission.
pub fn fixture(perm: &str) -> Fixture {
    let mut emu = Emulator::builder()
        .seed(11)
        .catalog(catalog())
        .clock(ManualClock::new(Timestamp(1_700_000_000_000)))
        .build();
    emu.create_project(P, "Matrix").unwrap();
    let good = emu.create_service_account(P, "good-sa", "").unwrap();
    let bad = emu.create_service_account(P, "bad-sa", "").unwrap();
    let runtime = emu.create_service_account(P, "runtime-sa", "").unwrap();
    emu.create_bucket(P, "matrix-bucket").unwrap();
    emu.create_instance(Instance {
        name: "vm-1".into(),
        project_id: P.into(),
        zone: "us-west1-b".into(),
        metadata: BTreeMap::new(),
        attached_service_account: runtime.email.clone(),
        container_image: None,
        serving_port: None,
    })
    .unwrap();
    emu.create_function(
        P,
        "fn-1",
        "log(\"hello\")\nrespond(\"hi\")",
        BTreeMap::new(),
        false,
        &runtime.email,
    )
    .unwrap();
    emu.function_invoke(None, P, "fn-1", &Request::default()).unwrap();
    emu.create_repo(P, "repo-1").unwrap();
    emu.push_commit(P, "repo-1", "init", [("a.txt".to_string(), b"a".to_vec())].into())
        .unwrap();
    emu.push_image(
        &format!("{P}/img:latest"),
        [("/app/x".to_string(), b"x".to_vec())].into(),
    )
    .unwrap();

    let mut bindings = vec![Binding {
        role: role_of(perm),
        members: [good.email.clone()].into(),
    }];
    for p in ALL.iter().filter(|p| **p != perm) {
        bindings.push(Binding {
            role: role_of(p),
            members: [bad.email.clone()].into(),
        });
    }
    bindings.push(Binding {
        role: role_of(perms::STORAGE_OBJECTS_CREATE),
        members: [runtime.email.clone()].into(),
    });
    emu.write_policy(P, bindings, None).unwrap();
    let rt = emu
        .mint_access_token(&runtime.email, &runtime.key_material)
        .unwrap()
        .token_id;
    emu.object_put(Some(&rt), "matrix-bucket", "x.txt", b"x".to_vec(), "text/plain")
        .unwrap();

    let authorized = emu.mint_access_token(&good.email, &good.key_material).unwrap().token_id;
    let unauthorized = emu.mint_access_token(&bad.email, &bad.key_material).unwrap().token_id;
    let identity = emu
        .mint_identity_token(&authorized, "https://example.test/")
        .unwrap()
        .token_id;
    Fixture {
        emu,
        authorized,
        unauthorized,
        identity,
    }
}

pub fn request_for(perm: &str, emu: &Emulator) -> ApiRequest {
    match perm {
        perms::STORAGE_BUCKETS_LIST => ApiRequest::get(&format!("/storage/v1/b?project={P}")),
        perms::STORAGE_OBJECTS_LIST => ApiRequest::get("/storage/v1/b/matrix-bucket/o"),
        perms::STORAGE_OBJECTS_GET => ApiRequest::get("/storage/v1/b/matrix-bucket/o/x.txt"),
        perms::STORAGE_OBJECTS_CREATE => ApiRequest::put("/storage/v1/b/matrix-bucket/o/y.txt")
            .with_header("Content-Type", "text/plain")
            .with_body(b"y".to_vec()),
        perms::COMPUTE_INSTANCES_LIST => ApiRequest::get(&format!("/compute/v1/projects/{P}/instances")),
        perms::COMPUTE_INSTANCES_SET_METADATA => {
            ApiRequest::post(&format!("/compute/v1/projects/{P}/instances/vm-1/setMetadata"))
                .with_json(&json!({"key": "k", "value": "v"}))
        }
        perms::LOGGING_ENTRIES_LIST => ApiRequest::get(&format!("/logging/v1/projects/{P}/entries")),
        perms::FUNCTIONS_LIST => ApiRequest::get(&format!("/functions/v1/projects/{P}/functions")),
        perms::FUNCTIONS_GET => ApiRequest::get(&format!("/functions/v1/projects/{P}/functions/fn-1")),
        perms::FUNCTIONS_SOURCE_GET => ApiRequest::get(&format!("/functions/v1/projects/{P}/functions/fn-1/source")),
        perms::FUNCTIONS_UPDATE => ApiRequest::put(&format!("/functions/v1/projects/{P}/functions/fn-1/source"))
            .with_body(b"respond(\"new\")".to_vec()),
        perms::REPOS_LIST => ApiRequest::get(&format!("/repos/v1/projects/{P}/repos")),
        perms::REPOS_GET => ApiRequest::get(&format!("/repos/v1/projects/{P}/repos/repo-1/commits")),
        perms::IMAGES_LIST => ApiRequest::get(&format!("/registry/v1/projects/{P}/images")),
        perms::IMAGES_PULL => ApiRequest::get(&format!("/registry/v1/pull/{P}/img:latest")),
        perms::GET_IAM_POLICY => ApiRequest::get(&format!("/iam/v1/projects/{P}/policy")),
        perms::SET_IAM_POLICY => {
            let policy = &emu.project_state(P).unwrap().policy;
            ApiRequest::put(&format!("/iam/v1/projects/{P}/policy"))
                .with_json(&json!({"bindings": policy.bindings, "etag": policy.etag}))
        }
        other => panic!("no request for {other}"),
    }
}

/// Runs every endpoint with no token, a malformed token, an identity
/// token, a token lacking the permission and one holding only it. Returns
/// the number of requests checked.
pub fn check_matrix() -> Result<usize, String> {
    let mut checked = 0;
    for perm in ALL {
        let f = fixture(perm);
        let cases = [
            (None, 401),
            (Some("at.".to_string() + &"0".repeat(64)), 401),
            (Some(f.identity.clone()), 401),
            (Some(f.unauthorized.clone()), 403),
            (Some(f.authorized.clone()), 200),
        ];
        for (token, want) in cases {
            let mut emu = f.emu.clone();
            let req = request_for(perm, &emu).with_bearer(token.as_deref());
            let resp = route(&mut emu, &req);
            if resp.status != want {
                return Err(format!("{perm} with {token:?}: {} {}", resp.status, resp.body_text()));
            }
            if want != 200 && !resp.body_text().contains(perm) {
                return Err(format!("{perm}: denial does not name the permission"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
