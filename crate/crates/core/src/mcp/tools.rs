use serde::Serialize;
use serde_json::{json, Value};

/// One callable tool: its name, documentation and I/O schemas.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ToolDescriptor {
    pub name: &'static str,
    pub description: &'static str,
    pub input_schema: Value,
    pub output_schema: Value,
}

fn object(required: &[&str], properties: Value) -> Value {
    json!({ "type": "object", "required": required, "properties": properties, "additionalProperties": false })
}

fn text() -> Value {
    json!({ "type": "string", "minLength": 1 })
}

fn file_ref() -> Value {
    object(&["file", "folder"], json!({ "file": text(), "folder": { "type": "string" } }))
}

fn file_with_content() -> Value {
    object(&["file", "folder", "content"], json!({ "file": text(), "folder": { "type": "string" }, "content": { "type": "string" } }))
}

fn log_map() -> Value {
    json!({ "type": "object", "additionalProperties": { "type": "string" } })
}

fn job_id_out() -> Value {
    object(&["job_id"], json!({ "job_id": text() }))
}

fn hpc_config() -> Value {
    let strings = json!({ "type": "array", "items": { "type": "string" } });
    object(
        &["account"],
        json!({
            "cluster_name": { "type": "string" },
            "account": { "type": "string" },
            "nodes": { "type": "integer", "minimum": 1 },
            "tasks": { "type": ["integer", "null"], "minimum": 1 },
            "walltime": { "type": "string" },
            "partition_hints": strings,
            "job_name": { "type": "string" },
            "memory": { "type": ["string", "null"] },
            "modules": strings,
        }),
    )
}

fn mesh_config() -> Value {
    object(
        &[],
        json!({
            "mode": { "enum": ["native", "external_msh", "external_dicts", "gmsh_script"] },
            "source_path": { "type": "string" },
            "boundary_names": { "type": "array", "items": { "type": "string" } },
        }),
    )
}

fn job_record() -> Value {
    object(
        &["job_id", "kind", "case_id", "status", "result_summary"],
        json!({
            "job_id": text(),
            "kind": { "enum": ["mesh", "simulation", "visualization"] },
            "case_id": text(),
            "status": { "enum": ["pending", "running", "succeeded", "failed"] },
            "result_summary": { "type": "object" },
        }),
    )
}

/// The tool set, in a fixed order.
pub fn register_tools() -> Vec<ToolDescriptor> {
    let case_only = || object(&["case_id"], json!({ "case_id": text() }));
    vec![
        ToolDescriptor {
            name: "create_case",
            description: "Initializes a new simulation case and its workspace directory. Optional attachments are paths to mesh files or mesh dictionaries.",
            input_schema: object(
                &["user_prompt"],
                json!({ "user_prompt": text(), "attachments": { "type": "array", "items": { "type": "string" } } }),
            ),
            output_schema: object(&["case_id"], json!({ "case_id": text() })),
        },
        ToolDescriptor {
            name: "plan_simulation_structure",
            description: "Classifies the case, retrieves a reference case and plans its files. The plan is returned in generation order and ends with the Allrun script.",
            input_schema: case_only(),
            output_schema: object(&["plan"], json!({ "plan": { "type": "array", "items": file_ref() } })),
        },
        ToolDescriptor {
            name: "generate_file_content",
            description: "Generates one case file and stores it on the case. Files generated earlier are given to the model as context. Folder \"\" with file \"Allrun\" generates the run script.",
            input_schema: object(&["case_id", "file", "folder"], json!({ "case_id": text(), "file": text(), "folder": { "type": "string" } })),
            output_schema: object(&["content"], json!({ "content": { "type": "string" } })),
        },
        ToolDescriptor {
            name: "generate_mesh",
            description: "Starts a mesh job. mesh_config takes mode (native, external_msh, external_dicts, gmsh_script), source_path and boundary_names; omitted fields are inferred from the prompt and attachments. The job decides the mesh commands and adds mesh artifacts to the case; the commands run as part of Allrun.",
            input_schema: object(&["case_id", "mesh_config"], json!({ "case_id": text(), "mesh_config": mesh_config() })),
            output_schema: job_id_out(),
        },
        ToolDescriptor {
            name: "generate_hpc_script",
            description: "Writes a Slurm batch script for the case and sets numberOfSubdomains to the task count. hpc_config takes cluster_name, account, nodes, tasks, walltime, partition_hints, job_name, memory and modules.",
            input_schema: object(&["case_id", "hpc_config"], json!({ "case_id": text(), "hpc_config": hpc_config() })),
            output_schema: object(&["script_content"], json!({ "script_content": text() })),
        },
        ToolDescriptor {
            name: "run_simulation",
            description: "Starts a simulation job that writes the case to disk and runs Allrun, locally or through the batch scheduler (environment \"hpc\", after generate_hpc_script).",
            input_schema: object(&["case_id", "environment"], json!({ "case_id": text(), "environment": { "enum": ["local", "hpc"] } })),
            output_schema: job_id_out(),
        },
        ToolDescriptor {
            name: "check_job_status",
            description: "Reports the state of a mesh, simulation or visualization job without waiting for it.",
            input_schema: object(&["job_id"], json!({ "job_id": text() })),
            output_schema: object(&["status"], json!({ "status": job_record() })),
        },
        ToolDescriptor {
            name: "get_simulation_logs",
            description: "Returns the logs a finished job captured, keyed by log name.",
            input_schema: object(&["case_id", "job_id"], json!({ "case_id": text(), "job_id": text() })),
            output_schema: object(&["logs"], json!({ "logs": log_map() })),
        },
        ToolDescriptor {
            name: "review_and_suggest_fix",
            description: "Analyses the failure shown by the given logs (a mapping from log name to text, or plain text) and proposes corrected files. Nothing is applied.",
            input_schema: object(
                &["case_id", "logs"],
                json!({ "case_id": text(), "logs": { "anyOf": [log_map(), { "type": "string", "minLength": 1 }] } }),
            ),
            output_schema: object(
                &["suggestions"],
                json!({ "suggestions": object(
                    &["analysis", "modifications"],
                    json!({ "analysis": { "type": "string" }, "modifications": { "type": "array", "items": file_with_content() } }),
                ) }),
            ),
        },
        ToolDescriptor {
            name: "apply_fix",
            description: "Replaces or adds the given files on the case.",
            input_schema: object(
                &["case_id", "modifications"],
                json!({ "case_id": text(), "modifications": { "type": "array", "minItems": 1, "items": file_with_content() } }),
            ),
            output_schema: object(&["status"], json!({ "status": text() })),
        },
        ToolDescriptor {
            name: "generate_visualization",
            description: "Starts a visualization job for a successfully run case. time is \"latest\" or a number; output_name defaults to <quantity>.png.",
            input_schema: object(
                &["case_id", "quantity"],
                json!({
                    "case_id": text(),
                    "quantity": text(),
                    "plane": { "type": "string" },
                    "time": { "anyOf": [{ "const": "latest" }, { "type": "number" }] },
                    "output_name": text(),
                }),
            ),
            output_schema: job_id_out(),
        },
    ]
}

pub fn find_tool(name: &str) -> Option<ToolDescriptor> {
    register_tools().into_iter().find(|t| t.name == name)
}
