from rqclab.cli import main

main()
