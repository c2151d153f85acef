import { ApiClient } from "./api.js";
import { SessionController } from "./app.js";

const base = (window as any).RECOURSELAB_API ?? window.location.origin;
const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

const controller = new SessionController(new ApiClient(base), root, window.sessionStorage);
controller.run().catch((err) => {
  root.replaceChildren();
  const msg = document.createElement("p");
  msg.className = "error";
  msg.textContent = `Something went wrong: ${err}. Reload to resume.`;
  root.appendChild(msg);
});
